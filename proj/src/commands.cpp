#include "empc/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "empc/error.hpp"

namespace empc::cmd {

namespace {

using io::json;

// Stream tags for the per-index generators.
constexpr std::uint64_t kStreamEval = 0x4556414c;   // "EVAL"
constexpr std::uint64_t kStreamAudit = 0x41554454;  // "AUDT"

template <class T>
void read_opt(const json& j, const char* key, T& dst) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::PreconditionViolated, std::string("config: bad value for '") + key + "': " + e.what());
    }
}

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
    require(j.is_object(), ErrorKind::PreconditionViolated, std::string("config: '") + section + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; });
        require(ok, ErrorKind::PreconditionViolated, std::string("config: unknown key '") + k + "' in " + section);
    }
}

void say(const Context& ctx, const std::string& line) {
    if (ctx.log) *ctx.log << line << '\n';
}

void audit_line(const Context& ctx, const std::string& what, bool ok) {
    say(ctx, std::string("audit: ") + what + (ok ? " ok" : " FAILED"));
    if (!ok) fail(ErrorKind::AuditFailed, what);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

Box input_box(const Scenario& s) {
    const auto bb = bounding_box(s.U);
    require(bb.has_value(), ErrorKind::PreconditionViolated, "input constraint set must be bounded");
    return {bb->first, bb->second};
}

Scenario with_horizon(Scenario s, std::size_t N) {
    if (N > 0) s.N = N;
    return s;
}

// ---------------------------------------------------------------------------
// Artifacts shared between stages.

Dataset load_or_generate_dataset(const Context& ctx) {
    const fs::path csv = ctx.out / "dataset.csv", meta = ctx.out / "dataset.meta.json";
    const CondensedMpc m = condense(ctx.cfg.scenario);
    if (fs::exists(csv) && fs::exists(meta)) {
        const json j = io::read_json(meta);
        require(j.value("fingerprint", std::string()) == m.fingerprint, ErrorKind::PreconditionViolated,
                "dataset.meta.json belongs to a different MPC problem; rerun generate");
        Dataset d = io::read_dataset_csv(csv);
        d.fingerprint = m.fingerprint;
        d.seed = j.value("seed", std::uint64_t{0});
        d.draws = j.value("draws", std::size_t{0});
        require(d.nx() == m.nx && d.nu() == m.nu, ErrorKind::PreconditionViolated, "dataset dimensions do not match");
        return d;
    }
    say(ctx, "dataset.csv not found; generating it");
    cmd_generate(ctx);
    return load_or_generate_dataset(ctx);
}

fs::path require_artifact(const Context& ctx, const std::string& file, const std::string& producer) {
    const fs::path p = ctx.out / file;
    require(fs::exists(p), ErrorKind::PreconditionViolated, file + " not found; run '" + producer + "' first");
    return p;
}

Controller with_projection(Controller raw, const Scenario& s, const std::string& mode) {
    if (mode == "none") return raw;
    std::optional<Polytope> cinv;
    if (mode == "qp") cinv = s.X;
    return [raw = std::move(raw), sys = s.system, U = s.U, cinv](const Vector& x) {
        return project_feasible(raw(x), x, sys, U, cinv);
    };
}

Controller oracle_controller(const Scenario& s, std::size_t horizon) {
    auto m = std::make_shared<CondensedMpc>(condense(with_horizon(s, horizon)));
    return [m](const Vector& x) { return mpc_control(*m, x); };
}

/// Approximate or reference controller by name, built from the artifacts in out/.
Controller named_controller(const Context& ctx, const std::string& name) {
    const Scenario& s = ctx.cfg.scenario;
    if (name == "implicit") return oracle_controller(s, ctx.cfg.oracle_horizon);
    if (name == "explicit") {
        auto f = std::make_shared<PwaFunction>(
            io::pwa_from_json(io::read_json(require_artifact(ctx, "explicit_law.json", "explicit"))));
        return [f](const Vector& x) { return eval_pwa(*f, x); };
    }
    Controller raw;
    if (name == "network") {
        auto n = std::make_shared<ReluNetwork>(
            io::network_from_json(io::read_json(require_artifact(ctx, "network.json", "train"))));
        raw = [n](const Vector& x) { return eval_network(*n, x); };
    } else if (name == "polynomial") {
        auto p = std::make_shared<Polynomial>(
            io::polynomial_from_json(io::read_json(require_artifact(ctx, "polynomial.json", "baselines"))));
        raw = [p](const Vector& x) { return poly_eval(*p, x); };
    } else if (name == "pwa_refit") {
        auto f = std::make_shared<PwaFunction>(
            io::pwa_from_json(io::read_json(require_artifact(ctx, "pwa_refit.json", "baselines"))));
        raw = [f](const Vector& x) { return eval_pwa(*f, x); };
    } else {
        fail(ErrorKind::PreconditionViolated, "unknown controller '" + name + "'");
    }
    return with_projection(std::move(raw), s, ctx.cfg.projection);
}

std::vector<std::string> evaluated_controllers(const Context& ctx) {
    if (!ctx.cfg.controllers.empty()) return ctx.cfg.controllers;
    std::vector<std::string> names{"implicit"};
    const std::pair<const char*, const char*> files[] = {{"explicit", "explicit_law.json"},
                                                         {"network", "network.json"},
                                                         {"polynomial", "polynomial.json"},
                                                         {"pwa_refit", "pwa_refit.json"}};
    for (const auto& [name, file] : files)
        if (fs::exists(ctx.out / file)) names.emplace_back(name);
    return names;
}

json kb_entry(std::size_t bytes) { return {{"bytes", bytes}, {"kB", format_kb(bytes)}}; }

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig parse_config(const json& j) {
    check_keys(j, "config",
               {"scenario", "seed", "generate", "explicit", "exactnet", "train", "baselines", "evaluate", "verify",
                "audit_fraction"});
    ExperimentConfig c;
    c.scenario = io::scenario_from_json(j.value("scenario", json("oscillator")));
    read_opt(j, "seed", c.seed);
    read_opt(j, "audit_fraction", c.audit_fraction);
    if (j.contains("generate")) {
        const json& g = j.at("generate");
        check_keys(g, "generate", {"n_tr"});
        read_opt(g, "n_tr", c.n_tr);
    }
    if (j.contains("explicit")) {
        const json& e = j.at("explicit");
        check_keys(e, "explicit", {"max_active_set_size", "max_subsets", "cheby_tol"});
        read_opt(e, "max_active_set_size", c.explicit_opts.max_active_set_size);
        read_opt(e, "max_subsets", c.explicit_opts.max_subsets);
        read_opt(e, "cheby_tol", c.explicit_opts.cheby_tol);
    }
    if (j.contains("exactnet")) {
        const json& e = j.at("exactnet");
        check_keys(e, "exactnet", {"samples"});
        read_opt(e, "samples", c.exact_samples);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train",
                   {"M", "L", "learning_rate", "beta1", "beta2", "eps", "batch_size", "epochs", "standardize"});
        read_opt(t, "M", c.train.M);
        read_opt(t, "L", c.train.L);
        read_opt(t, "learning_rate", c.train.learning_rate);
        read_opt(t, "beta1", c.train.beta1);
        read_opt(t, "beta2", c.train.beta2);
        read_opt(t, "eps", c.train.eps);
        read_opt(t, "batch_size", c.train.batch_size);
        read_opt(t, "epochs", c.train.epochs);
        read_opt(t, "standardize", c.train.standardize);
    }
    if (j.contains("baselines")) {
        const json& b = j.at("baselines");
        check_keys(b, "baselines", {"poly_degree", "pwa_horizon"});
        read_opt(b, "poly_degree", c.poly_degree);
        read_opt(b, "pwa_horizon", c.pwa_horizon);
    }
    if (j.contains("evaluate")) {
        const json& e = j.at("evaluate");
        check_keys(e, "evaluate", {"states", "controllers", "projection", "oracle_horizon", "plot_trajectories"});
        read_opt(e, "states", c.eval_states);
        read_opt(e, "controllers", c.controllers);
        read_opt(e, "projection", c.projection);
        read_opt(e, "oracle_horizon", c.oracle_horizon);
        read_opt(e, "plot_trajectories", c.plot_trajectories);
    }
    if (j.contains("verify")) {
        const json& v = j.at("verify");
        check_keys(v, "verify", {"controller", "g", "t", "v", "C", "nu", "epsilon", "floor", "delta"});
        read_opt(v, "controller", c.verify_controller);
        read_opt(v, "g", c.label_sizes.g);
        read_opt(v, "t", c.label_sizes.t);
        read_opt(v, "v", c.label_sizes.v);
        read_opt(v, "C", c.svm.C);
        read_opt(v, "nu", c.svm.nu);
        read_opt(v, "epsilon", c.ellipsoid.epsilon);
        read_opt(v, "floor", c.ellipsoid.floor);
        read_opt(v, "delta", c.delta);
    }
    require(c.n_tr >= 1 && c.exact_samples >= 1 && c.eval_states >= 1, ErrorKind::PreconditionViolated,
            "config: sizes must be positive");
    require(c.projection == "clamp" || c.projection == "qp" || c.projection == "none",
            ErrorKind::PreconditionViolated, "config: projection must be clamp, qp or none");
    require(c.pwa_horizon >= 1, ErrorKind::PreconditionViolated, "config: pwa_horizon must be >= 1");
    require(c.audit_fraction > 0.0 && c.audit_fraction <= 1.0, ErrorKind::PreconditionViolated,
            "config: audit_fraction must lie in (0, 1]");
    require(c.delta > 0.0 && c.delta < 1.0, ErrorKind::PreconditionViolated, "config: delta must lie in (0, 1)");
    c.train.validate(c.scenario.nx());
    return c;
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(io::read_json(path)); }

// ---------------------------------------------------------------------------

void cmd_generate(const Context& ctx) {
    const ExperimentConfig& c = ctx.cfg;
    const CondensedMpc m = condense(c.scenario);
    const Dataset d = generate_dataset(m, c.n_tr, c.seed, c.scenario.sample_box);
    io::write_dataset_csv(ctx.out / "dataset.csv", d);
    io::write_json(ctx.out / "dataset.meta.json", {{"scenario", io::to_json(c.scenario)},
                                                    {"n_tr", d.points.size()},
                                                    {"nx", d.nx()},
                                                    {"nu", d.nu()},
                                                    {"seed", c.seed},
                                                    {"draws", d.draws},
                                                    {"fingerprint", d.fingerprint}});
    say(ctx, "generate: " + std::to_string(d.points.size()) + " points from " + std::to_string(d.draws) + " draws");
    if (!ctx.audit) return;
    const Dataset back = io::read_dataset_csv(ctx.out / "dataset.csv");
    const auto checks = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(c.audit_fraction * c.n_tr)));
    double worst = 0.0;
    for (std::size_t k = 0; k < checks; ++k) {
        const std::size_t i = k * back.points.size() / checks;
        worst = std::max(worst, norm_inf(sub(mpc_control(m, back.points[i].x), back.points[i].u)));
    }
    audit_line(ctx, "re-solved " + std::to_string(checks) + " labels, max deviation " + io::format_double(worst),
               worst <= 1e-7);
}

void cmd_explicit(const Context& ctx) {
    const ExperimentConfig& c = ctx.cfg;
    const CondensedMpc m = condense(c.scenario);
    const ExplicitLaw law = enumerate_explicit(m, c.explicit_opts);
    const PwaMemory mem = memory_footprint_pwa(law.law);
    io::write_json(ctx.out / "explicit_law.json", io::to_json(law));
    json report = {{"scenario", c.scenario.name},
                   {"N", c.scenario.N},
                   {"n_r", law.regions.size()},
                   {"n_h", mem.n_h},
                   {"n_f", mem.n_f},
                   {"alpha_bit", 8},
                   {"candidates", law.candidates},
                   {"degenerate_skipped", law.degenerate_skipped}};
    report["memory"] = kb_entry(mem.bytes);
    io::write_json(ctx.out / "explicit_report.json", report);
    say(ctx, "explicit: " + std::to_string(law.regions.size()) + " regions, " + format_kb(mem.bytes) + " kB");
    if (!ctx.audit) return;
    const std::size_t draws = std::max<std::size_t>(20, static_cast<std::size_t>(c.audit_fraction * 10000));
    const auto states = draw_initial_states(c.scenario.sample_box, draws, c.seed, kStreamAudit);
    double worst = 0.0;
    std::size_t checked = 0;
    for (const auto& x : states) {
        if (!is_feasible(m, x)) continue;
        ++checked;
        worst = std::max(worst, norm_inf(sub(eval_pwa(law.law, x), mpc_control(m, x))));
    }
    audit_line(ctx,
               "explicit law vs QP at " + std::to_string(checked) + " feasible states, max deviation " +
                   io::format_double(worst),
               worst <= 1e-6);
}

void cmd_exactnet(const Context& ctx) {
    const ExperimentConfig& c = ctx.cfg;
    const ExplicitLaw law = enumerate_explicit(condense(c.scenario), c.explicit_opts);
    const ExactRepresentation rep = exact_mpc_network(law.law, c.scenario.sample_box, input_box(c.scenario));
    const ProxError err = max_sampled_error(law.law, rep, c.scenario.sample_box, c.exact_samples);
    io::write_json(ctx.out / "exact_network.json", io::to_json(rep));
    json outputs = json::array();
    std::size_t params = 0;
    for (const auto& [g, e] : rep.pairs) {
        outputs.push_back({{"width", g.width()}, {"depth_gamma", g.depth()}, {"depth_eta", e.depth()}});
        params += param_count(g) + param_count(e);
    }
    json report = {{"scenario", c.scenario.name}, {"n_r", law.regions.size()}, {"e_prox", err.max_error},
                   {"points", err.points},        {"samples", c.exact_samples}, {"outputs", outputs},
                   {"params", params}};
    report["memory"] = kb_entry(8 * params);
    io::write_json(ctx.out / "exact_report.json", report);
    say(ctx, "exactnet: e_prox = " + io::format_double(err.max_error) + " over " + std::to_string(err.points) +
                 " points");
    if (!ctx.audit) return;
    const ExactRepresentation back = io::exact_from_json(io::read_json(ctx.out / "exact_network.json"));
    const auto states = draw_initial_states(c.scenario.sample_box, 50, c.seed, kStreamAudit);
    bool same = true;
    for (const auto& x : states) same = same && back.eval(x) == rep.eval(x);
    audit_line(ctx, "exact_network.json reproduces the in-memory networks", same);
}

void cmd_train(const Context& ctx) {
    const ExperimentConfig& c = ctx.cfg;
    const Dataset d = load_or_generate_dataset(ctx);
    TrainConfig tc = c.train;
    tc.seed = c.seed;
    const TrainResult r = train_mlp(d, tc);
    io::write_json(ctx.out / "network.json", io::to_json(r.net));
    std::string loss = "epoch,mse\n";
    for (std::size_t e = 0; e < r.loss_history.size(); ++e)
        loss += std::to_string(e + 1) + "," + io::format_double(r.loss_history[e]) + "\n";
    io::write_text(ctx.out / "loss.csv", loss);
    json report = {{"M", tc.M},          {"L", tc.L},           {"epochs", tc.epochs},
                   {"seed", tc.seed},    {"n_tr", d.points.size()}, {"params", param_count(r.net)},
                   {"final_mse", r.final_mse}};
    report["memory"] = kb_entry(memory_footprint_net(r.net));
    io::write_json(ctx.out / "train_report.json", report);
    say(ctx, "train: N_{" + std::to_string(tc.M) + "," + std::to_string(tc.L) + "} final mse " +
                 io::format_double(r.final_mse) + ", " + format_kb(memory_footprint_net(r.net)) + " kB");
    if (!ctx.audit) return;
    const ReluNetwork back = io::network_from_json(io::read_json(ctx.out / "network.json"));
    const double again = mse(back, d.points);
    audit_line(ctx, "reloaded network reproduces final mse", again == r.final_mse);
}

void cmd_baselines(const Context& ctx) {
    const ExperimentConfig& c = ctx.cfg;
    const Dataset d = load_or_generate_dataset(ctx);
    const Polynomial poly = fit_polynomial(d, c.poly_degree);
    double poly_mse = 0.0;
    for (const auto& p : d.points) {
        const Vector r = sub(poly_eval(poly, p.x), p.u);
        poly_mse += dot(r, r);
    }
    poly_mse /= static_cast<double>(d.points.size());
    io::write_json(ctx.out / "polynomial.json", io::to_json(poly));

    const ExplicitLaw partition = enumerate_explicit(condense(with_horizon(c.scenario, c.pwa_horizon)), c.explicit_opts);
    const PwaRefit refit = fit_pwa_gains(partition.law, d);
    io::write_json(ctx.out / "pwa_refit.json", io::to_json(refit.law));

    json poly_j = {{"degree", poly.degree}, {"terms", poly.num_terms()}, {"mse", poly_mse}};
    poly_j["memory"] = kb_entry(memory_footprint_poly(poly));
    json pwa_j = {{"horizon", c.pwa_horizon},
                  {"regions", refit.law.regions.size()},
                  {"kept_prior", refit.kept_prior},
                  {"objective_before", pwa_objective(partition.law, d)},
                  {"objective_after", pwa_objective(refit.law, d)}};
    pwa_j["memory"] = kb_entry(memory_footprint_pwa(refit.law).bytes);
    io::write_json(ctx.out / "baselines_report.json", {{"polynomial", poly_j}, {"pwa_refit", pwa_j}});
    say(ctx, "baselines: P_" + std::to_string(poly.degree) + " " + format_kb(memory_footprint_poly(poly)) +
                 " kB, PWA refit over " + std::to_string(refit.law.regions.size()) + " regions");
    if (!ctx.audit) return;
    const Polynomial back = io::polynomial_from_json(io::read_json(ctx.out / "polynomial.json"));
    audit_line(ctx, "polynomial.json round trip", back.coeffs == poly.coeffs);
}


namespace {

struct RunStats {
    std::optional<std::size_t> settle;
    bool failed = false;
    bool state_violation = false;
    bool input_violation = false;
    Trajectory traj;
};

RunStats run_one(const Scenario& s, const Controller& c, const Vector& x0) {
    RunStats r;
    try {
        r.traj = rollout(s.system, c, x0, s.k_end);
    } catch (const ControllerInfeasibleError&) {
        r.failed = true;
        return r;
    }
    r.settle = settling_time(r.traj, s.settle_tol);
    for (const auto& x : r.traj.states) r.state_violation = r.state_violation || !s.X.contains(x, kLabelTol);
    for (const auto& u : r.traj.inputs) r.input_violation = r.input_violation || !s.U.contains(u, kLabelTol);
    return r;
}

// Initial states (in draw order) from which the oracle completes its rollout.
std::vector<Vector> shared_initial_states(const Context& ctx, const Controller& oracle, std::size_t& candidates) {
    const ExperimentConfig& c = ctx.cfg;
    const Box& box = c.scenario.sample_box;
    const std::size_t want = c.eval_states, cap = 100 * want;
    std::vector<Vector> accepted;
    std::size_t next = 0;
    while (accepted.size() < want) {
        if (next >= cap)
            fail(ErrorKind::SamplingExhausted,
                 "evaluate: oracle feasible from only " + std::to_string(accepted.size()) + " of " +
                     std::to_string(cap) + " candidate states");
        const std::size_t batch = std::min(2 * want, cap - next);
        std::vector<Vector> xs(batch);
        std::vector<char> ok(batch, 0);
        for_each_index(batch, Exec::Parallel, [&](std::size_t i) {
            auto rng = index_stream(c.seed, kStreamEval, next + i);
            Vector x(box.dim());
            for (std::size_t j = 0; j < x.size(); ++j) x[j] = uniform(rng, box.lo[j], box.hi[j]);
            ok[i] = !run_one(c.scenario, oracle, x).failed;
            xs[i] = std::move(x);
        });
        for (std::size_t i = 0; i < batch && accepted.size() < want; ++i) {
            if (ok[i]) accepted.push_back(std::move(xs[i]));
            candidates = next + i + 1;
        }
        next += batch;
    }
    return accepted;
}

}  // namespace

void cmd_evaluate(const Context& ctx) {
    const ExperimentConfig& c = ctx.cfg;
    const Scenario& s = c.scenario;
    const std::size_t horizon = c.oracle_horizon ? c.oracle_horizon : s.N;
    const Controller oracle = oracle_controller(s, horizon);
    // Load every artifact before the expensive sampling so a missing file fails fast.
    std::vector<std::pair<std::string, Controller>> controllers;
    for (const std::string& name : evaluated_controllers(ctx)) controllers.emplace_back(name, named_controller(ctx, name));
    std::size_t candidates = 0;
    const std::vector<Vector> x0s = shared_initial_states(ctx, oracle, candidates);

    std::vector<RunStats> reference(x0s.size());
    for_each_index(x0s.size(), Exec::Parallel, [&](std::size_t i) { reference[i] = run_one(s, oracle, x0s[i]); });
    std::vector<std::optional<std::size_t>> ref_times;
    for (const auto& r : reference) ref_times.push_back(r.settle);
    const double ast_ref = average_settling_time(ref_times, s.k_end);

    std::string csv = "controller,trajectory,k";
    for (std::size_t j = 0; j < s.nx(); ++j) csv += ",x" + std::to_string(j);
    for (std::size_t j = 0; j < s.nu(); ++j) csv += ",u" + std::to_string(j);
    csv += "\n";

    json entries = json::array();
    for (const auto& [name, ctrl] : controllers) {
        std::vector<RunStats> runs(x0s.size());
        for_each_index(x0s.size(), Exec::Parallel, [&](std::size_t i) { runs[i] = run_one(s, ctrl, x0s[i]); });
        std::vector<std::optional<std::size_t>> times;
        std::size_t failures = 0, xv = 0, uv = 0, unsettled = 0;
        for (const auto& r : runs) {
            times.push_back(r.settle);
            failures += r.failed;
            xv += r.state_violation;
            uv += r.input_violation;
            unsettled += !r.settle.has_value();
        }
        const double ast = average_settling_time(times, s.k_end);
        entries.push_back({{"name", name},
                           {"ast", ast},
                           {"rast", relative_ast(ast, ast_ref)},
                           {"failures", failures},
                           {"unsettled", unsettled},
                           {"state_violations", xv},
                           {"input_violations", uv}});
        for (std::size_t i = 0; i < std::min(c.plot_trajectories, runs.size()); ++i) {
            const Trajectory& t = runs[i].traj;
            for (std::size_t k = 0; k < t.states.size(); ++k) {
                csv += name + "," + std::to_string(i) + "," + std::to_string(k);
                for (double v : t.states[k]) csv += "," + io::format_double(v);
                for (std::size_t j = 0; j < s.nu(); ++j)
                    csv += "," + (k < t.inputs.size() ? io::format_double(t.inputs[k][j]) : std::string());
                csv += "\n";
            }
        }
        say(ctx, "evaluate: " + name + " AST " + fixed(ast, 3) + " rAST " + fixed(relative_ast(ast, ast_ref), 3));
    }
    io::write_text(ctx.out / "trajectories.csv", csv);
    io::write_json(ctx.out / "evaluate_report.json", {{"scenario", s.name},
                                                       {"states", x0s.size()},
                                                       {"candidates", candidates},
                                                       {"oracle_horizon", horizon},
                                                       {"projection", c.projection},
                                                       {"settle_tol", s.settle_tol},
                                                       {"k_end", s.k_end},
                                                       {"ast_reference", ast_ref},
                                                       {"controllers", entries}});
    if (!ctx.audit) return;
    // The oracle against itself must reproduce rAST = 1 exactly.
    bool ok = true;
    for (const auto& e : entries)
        if (e.at("name") == "implicit" && horizon == s.N) ok = ok && e.at("rast").get<double>() == 1.0;
    audit_line(ctx, "implicit oracle reproduces its own AST", ok);
}

void cmd_verify(const Context& ctx) {
    const ExperimentConfig& c = ctx.cfg;
    const Scenario& s = c.scenario;
    const Controller approx = named_controller(ctx, c.verify_controller);
    const Controller oracle = oracle_controller(s, c.oracle_horizon);

    const LabeledSets dnn = generate_labeled_sets(approx, s, c.label_sizes, c.seed, c.verify_controller);
    std::vector<Vector> t_states;
    for (const auto& p : dnn.T.points) t_states.push_back(p.x0);
    const LabeledInitialSet t_exp = label_initial_states(s, oracle, t_states, "implicit", c.seed);

    const EllipsoidSafeSet ell = fit_ellipsoid(s.nx(), dnn.G.states(-1), c.ellipsoid);
    const SvmSafeSet svm = fit_svm(dnn.G, c.svm);
    const SafeSet in_ell = [&](const Vector& x) { return ellipsoid_contains(ell, x); };
    const SafeSet in_svm = [&](const Vector& x) { return svm_classify(svm, x) == 1; };

    const SafeCounts v_ell = count_in_safe_set(in_ell, dnn.V), v_svm = count_in_safe_set(in_svm, dnn.V);
    const SafeCounts g_ell = count_in_safe_set(in_ell, dnn.G);
    const std::size_t n_s = std::min(v_ell.inside, v_svm.inside);
    json report = {{"m_dir", metric_m_dir(dnn.T, t_exp)},
                   {"m_vol_ell", metric_m_vol(in_ell, dnn.T, t_exp)},
                   {"m_vol_svm", metric_m_vol(in_svm, dnn.T, t_exp)},
                   {"m_fp_ell", metric_m_fp(in_ell, dnn.V)},
                   {"m_fp_svm", metric_m_fp(in_svm, dnn.V)},
                   {"r_emp_ell", empirical_risk(v_ell.valid, v_ell.inside)},
                   {"r_emp_svm", empirical_risk(v_svm.valid, v_svm.inside)},
                   {"delta", c.delta},
                   {"confidence", hoeffding(n_s, c.delta)}};
    io::write_json(ctx.out / "ellipsoid.json", io::to_json(ell));
    io::write_json(ctx.out / "svm.json", io::to_json(svm));
    io::write_json(ctx.out / "verify_report.json", report);
    io::write_labeled_csv(ctx.out / "g_set.csv", dnn.G);
    io::write_labeled_csv(ctx.out / "t_set.csv", dnn.T);
    io::write_labeled_csv(ctx.out / "t_oracle_set.csv", t_exp);
    io::write_labeled_csv(ctx.out / "v_set.csv", dnn.V);
    io::write_json(ctx.out / "verify_details.json",
                   {{"controller", c.verify_controller},
                    {"sizes", {{"g", c.label_sizes.g}, {"t", c.label_sizes.t}, {"v", c.label_sizes.v}}},
                    {"g_invalid", dnn.G.count(-1)},
                    {"t_valid", dnn.T.count(1)},
                    {"t_oracle_valid", t_exp.count(1)},
                    {"v_inside_ell", v_ell.inside},
                    {"v_valid_inside_ell", v_ell.valid},
                    {"v_inside_svm", v_svm.inside},
                    {"v_valid_inside_svm", v_svm.valid},
                    {"n_s", n_s},
                    {"fitting_false_positives_ell", g_ell.inside - g_ell.valid},
                    {"svm_support_vectors", svm.support_vectors.size()},
                    {"svm_kkt_violation", svm.kkt_violation},
                    {"C", svm.C},
                    {"nu", svm.nu},
                    {"epsilon", ell.epsilon},
                    {"floor", c.ellipsoid.floor}});
    say(ctx, "verify: m_dir " + fixed(report["m_dir"].get<double>(), 4) + ", confidence " +
                 format_confidence(report["confidence"].get<double>()) + " %");
    if (!ctx.audit) return;
    bool in_range = true;
    for (const auto& [k, v] : report.items())
        if (k != "delta" && k != "confidence" && k != "m_dir") in_range = in_range && v >= 0.0 && v <= 1.0;
    audit_line(ctx, "rates lie in [0, 1]", in_range);
    audit_line(ctx, "no fitting-set point inside the ellipsoid", g_ell.inside == g_ell.valid);
    const SvmSafeSet back = io::svm_from_json(io::read_json(ctx.out / "svm.json"));
    bool same = true;
    for (std::size_t i = 0; i < std::min<std::size_t>(200, dnn.V.points.size()); ++i)
        same = same && svm_classify(back, dnn.V.points[i].x0) == svm_classify(svm, dnn.V.points[i].x0);
    audit_line(ctx, "svm.json reproduces the classifier", same);
}

std::string format_confidence(double confidence) {
    if (confidence > 0.999) return ">99.9";
    return fixed(100.0 * confidence, 1);
}

void cmd_report(const Context& ctx) {
    auto load = [&](const char* file) -> std::optional<json> {
        const fs::path p = ctx.out / file;
        if (!fs::exists(p)) return std::nullopt;
        return io::read_json(p);
    };
    const auto expl = load("explicit_report.json");
    const auto exact = load("exact_report.json");
    const auto train = load("train_report.json");
    const auto base = load("baselines_report.json");
    const auto eval = load("evaluate_report.json");
    const auto ver = load("verify_report.json");
    const auto details = load("verify_details.json");
    require(expl || exact || train || base || eval || ver, ErrorKind::PreconditionViolated,
            "report: no stage reports found in " + ctx.out.string());

    std::ostringstream md;
    md << "# Report: " << ctx.cfg.scenario.name << "\n\nSeed " << ctx.cfg.seed << ".\n";
    if (expl) {
        md << "\n## Explicit MPC\n\n| N | regions | hyperplanes | feedback laws | memory [kB] |\n|---|---|---|---|---|\n"
           << "| " << (*expl)["N"] << " | " << (*expl)["n_r"] << " | " << (*expl)["n_h"] << " | " << (*expl)["n_f"]
           << " | " << (*expl)["memory"]["kB"].get<std::string>() << " |\n";
    }
    if (exact) {
        md << "\n## Exact ReLU representation\n\nMax sampled error " << io::format_double((*exact)["e_prox"])
           << " over " << (*exact)["points"] << " points.\n\n| output | width | depth γ | depth η |\n|---|---|---|---|\n";
        std::size_t i = 0;
        for (const auto& o : (*exact)["outputs"])
            md << "| " << i++ << " | " << o["width"] << " | " << o["depth_gamma"] << " | " << o["depth_eta"] << " |\n";
    }
    std::map<std::string, std::string> memory;
    if (expl) memory["explicit"] = (*expl)["memory"]["kB"];
    if (train) memory["network"] = (*train)["memory"]["kB"];
    if (base) {
        memory["polynomial"] = (*base)["polynomial"]["memory"]["kB"];
        memory["pwa_refit"] = (*base)["pwa_refit"]["memory"]["kB"];
    }
    if (train)
        md << "\n## Training\n\nN_{" << (*train)["M"] << "," << (*train)["L"] << "}: " << (*train)["params"]
           << " parameters, final MSE " << io::format_double((*train)["final_mse"]) << ".\n";
    if (eval) {
        md << "\n## Closed loop\n\n" << (*eval)["states"] << " shared initial states, oracle horizon "
           << (*eval)["oracle_horizon"] << ", projection " << (*eval)["projection"].get<std::string>()
           << ".\n\n| controller | AST | rAST | failures | state violations | input violations | memory [kB] |\n"
           << "|---|---|---|---|---|---|---|\n";
        for (const auto& e : (*eval)["controllers"]) {
            const std::string name = e["name"];
            md << "| " << name << " | " << fixed(e["ast"], 2) << " | " << fixed(e["rast"], 3) << " | "
               << e["failures"] << " | " << e["state_violations"] << " | " << e["input_violations"] << " | "
               << (memory.count(name) ? memory[name] : std::string("–")) << " |\n";
        }
    } else if (!memory.empty()) {
        md << "\n## Memory\n\n| controller | memory [kB] |\n|---|---|\n";
        for (const auto& [name, kb] : memory) md << "| " << name << " | " << kb << " |\n";
    }
    if (ver) {
        const json& v = *ver;
        auto pct = [](const json& x) { return fixed(100.0 * x.get<double>(), 1); };
        md << "\n## Statistical verification\n\nm_dir = " << pct(v["m_dir"]) << " %.\n\n"
           << "| safe set | m_vol [%] | m_fp [%] | r_emp [%] |\n|---|---|---|---|\n"
           << "| ellipsoid | " << pct(v["m_vol_ell"]) << " | " << pct(v["m_fp_ell"]) << " | " << pct(v["r_emp_ell"])
           << " |\n| SVM | " << pct(v["m_vol_svm"]) << " | " << pct(v["m_fp_svm"]) << " | " << pct(v["r_emp_svm"])
           << " |\n\n";
        const double delta = v["delta"];
        md << "With confidence " << format_confidence(v["confidence"]) << " %";
        if (details) md << " (n_s = " << (*details)["n_s"] << ")";
        md << ", the true rate of valid trajectories inside each safe set is at least r_emp − " << delta << ".\n";
    }
    io::write_text(ctx.out / "report.md", md.str());
    say(ctx, "report: wrote " + (ctx.out / "report.md").string());
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"generate", "explicit", "exactnet", "train",
                                                "baselines", "evaluate", "verify",   "report"};
    return names;
}

void run_command(const std::string& name, const Context& ctx) {
    if (name == "generate") return cmd_generate(ctx);
    if (name == "explicit") return cmd_explicit(ctx);
    if (name == "exactnet") return cmd_exactnet(ctx);
    if (name == "train") return cmd_train(ctx);
    if (name == "baselines") return cmd_baselines(ctx);
    if (name == "evaluate") return cmd_evaluate(ctx);
    if (name == "verify") return cmd_verify(ctx);
    if (name == "report") return cmd_report(ctx);
    fail(ErrorKind::PreconditionViolated, "unknown command '" + name + "'");
}

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return is_precondition_error(err->kind()) ? 2 : 3;
    if (dynamic_cast<const json::exception*>(&e)) return 2;
    return 3;
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Explicit MPC, ReLU approximations and statistical verification", "empc"};
    std::string config, outdir = "out";
    std::uint64_t seed = 0;
    bool audit = false;
    app.add_option("--config", config, "JSON experiment configuration");
    auto* seed_opt = app.add_option("--seed", seed, "global seed (overrides the config)");
    app.add_option("--out", outdir, "output directory")->capture_default_str();
    app.add_flag("--audit", audit, "re-check results with independent spot checks");
    const std::map<std::string, std::string> help{
        {"generate", "sample states and label them with the MPC oracle"},
        {"explicit", "enumerate the explicit MPC law and its memory footprint"},
        {"exactnet", "build the exact ReLU representation of the explicit law"},
        {"train", "train the ReLU network approximation"},
        {"baselines", "fit the polynomial and PWA-refit baselines"},
        {"evaluate", "closed-loop comparison against the MPC oracle"},
        {"verify", "safe sets, verification metrics and Hoeffding confidence"},
        {"report", "summarize all stage reports as Markdown"}};
    for (const auto& name : command_names()) app.add_subcommand(name, help.at(name))->fallthrough();
    app.require_subcommand(1, 1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    try {
        Context ctx;
        ctx.cfg = config.empty() ? parse_config(json::object()) : load_config(config);
        if (seed_opt->count() > 0) ctx.cfg.seed = seed;
        ctx.out = outdir;
        ctx.audit = audit;
        ctx.log = &out;
        run_command(name, ctx);
    } catch (const std::exception& e) {
        err << "empc " << name << ": " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}

}  // namespace empc::cmd
