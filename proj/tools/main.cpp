#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "morsdp/bandit.hpp"
#include "morsdp/bellman.hpp"
#include "morsdp/errors.hpp"
#include "morsdp/model_io.hpp"
#include "morsdp/oracle.hpp"
#include "morsdp/parallel.hpp"
#include "morsdp/pomdp.hpp"
#include "morsdp/result_io.hpp"

namespace {

using namespace morsdp;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw ValidationError("cannot read model file: " + path);
    return buf.str();
}

void write_output(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write output file: " + out_path);
    out << text;
    out.flush();
    if (!out.good()) throw ValidationError("cannot write output file: " + out_path);
}

MdpDocument load_mdp(const std::string& path, const char* cmd) {
    ModelDocument doc = parse_model(read_file(path));
    if (!std::holds_alternative<MdpDocument>(doc))
        throw ValidationError(std::string(cmd) +
                              " expects an mdp model document; use solve-pomdp, reduce, or "
                              "oracle for pomdp models");
    return std::get<MdpDocument>(std::move(doc));
}

PomdpDocument load_pomdp(const std::string& path, const char* cmd) {
    ModelDocument doc = parse_model(read_file(path));
    if (!std::holds_alternative<PomdpDocument>(doc))
        throw ValidationError(std::string(cmd) + " expects a pomdp model document");
    return std::get<PomdpDocument>(std::move(doc));
}

Vec parse_theta0(const std::string& text, int num_hidden) {
    if (text.empty()) {
        Vec theta(static_cast<std::size_t>(num_hidden),
                  1.0 / static_cast<double>(num_hidden));
        return theta;
    }
    Vec theta;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string piece = text.substr(pos, comma - pos);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(piece, &used);
        } catch (const std::exception&) {
            throw ValidationError("cannot parse --theta0: expected comma-separated numbers");
        }
        if (used != piece.size())
            throw ValidationError("cannot parse --theta0: expected comma-separated numbers");
        theta.push_back(v);
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    return theta;
}

StateId resolve_x0(const FiniteMdp& m, const std::string& label) {
    if (label.empty()) return 0;
    const StateId x = m.state_index(label);
    if (x < 0) throw ValidationError("unknown start state label: " + label);
    return x;
}

struct CommonArgs {
    std::string model_path;
    std::string out_path;
    std::string format = "json";
    std::string dump_layers;
    std::string x0_label;
    std::string theta0_text;
    int horizon = 1;
    double tol = 1e-6;
    int max_iter = 500;
    int threads = 0;
    std::size_t budget_states = 10'000'000;
    std::size_t budget_atoms = 10'000'000;
    bool no_shift = false;
    std::string policy_class = "history";
    double mu = 1.0;
    int grid = 5;
    bool check = false;
};

int run_solve(const CommonArgs& a) {
    MdpDocument doc = load_mdp(a.model_path, "solve");
    SolveOptions opts;
    opts.state_budget = a.budget_states;
    opts.keep_tables = a.format == "csv";
    const StateId x0 = resolve_x0(doc.model, a.x0_label);
    FiniteSolveResult r = solve_finite(doc.model, doc.utility, doc.discount, x0, a.horizon, opts);
    if (!a.dump_layers.empty())
        write_output(a.dump_layers, layer_sizes_csv(r.policy.layers()));
    if (a.format == "csv")
        write_output(a.out_path, value_table_csv(doc.model, r.policy, r.tables));
    else
        write_output(a.out_path, finite_result_json(doc.model, r));
    return 0;
}

int run_solve_inf(const CommonArgs& a) {
    MdpDocument doc = load_mdp(a.model_path, "solve-inf");
    SolveOptions opts;
    opts.state_budget = a.budget_states;
    opts.max_iterations = a.max_iter;
    const StateId x0 = resolve_x0(doc.model, a.x0_label);
    InfiniteSolveResult r = solve_infinite(doc.model, doc.utility, doc.discount, x0, a.tol, opts);
    if (!a.dump_layers.empty())
        write_output(a.dump_layers, layer_sizes_csv(r.policy.layers()));
    if (a.format == "csv")
        write_output(a.out_path, certificate_csv(r.certificate));
    else
        write_output(a.out_path, infinite_result_json(doc.model, r));
    return 0;
}

int run_solve_pomdp(const CommonArgs& a) {
    if (a.format == "csv")
        throw ValidationError(
            "solve-pomdp has no CSV form; use --dump-layers for the layer table");
    PomdpDocument doc = load_pomdp(a.model_path, "solve-pomdp");
    const Vec theta0 = parse_theta0(a.theta0_text, doc.model.num_hidden());
    SolveOptions opts;
    opts.state_budget = a.budget_states;
    opts.apply_shift = !a.no_shift;
    RspomdpResult r = solve_rspomdp(doc.model, theta0, a.horizon, opts);
    if (!a.dump_layers.empty()) write_output(a.dump_layers, layer_sizes_csv(r.layer_sizes));
    write_output(a.out_path, rspomdp_result_json(doc.model, r));
    return 0;
}

int run_reduce(const CommonArgs& a) {
    PomdpDocument doc = load_pomdp(a.model_path, "reduce");
    const Vec theta0 = parse_theta0(a.theta0_text, doc.model.num_hidden());
    MdpDocument reduced = reduce_to_document(doc.model, theta0, a.horizon, a.budget_states);
    write_output(a.out_path, print_model(reduced));
    return 0;
}

int run_oracle(const CommonArgs& a, bool class_given) {
    ModelDocument doc = parse_model(read_file(a.model_path));
    if (std::holds_alternative<PomdpDocument>(doc)) {
        if (class_given)
            throw ValidationError("--class applies to completely observable models only");
        const PomdpModel& p = std::get<PomdpDocument>(doc).model;
        const Vec theta0 = parse_theta0(a.theta0_text, p.num_hidden());
        PomdpSearchResult r = enumerate_pomdp_policies(p, theta0, a.horizon, a.budget_atoms);
        write_output(a.out_path, pomdp_oracle_json(p, r));
        return 0;
    }
    const MdpDocument& d = std::get<MdpDocument>(doc);
    const StateId x0 = resolve_x0(d.model, a.x0_label);
    const PolicyClass cls =
        a.policy_class == "markov" ? PolicyClass::Markov : PolicyClass::History;
    MdpSearchResult r =
        enumerate_mdp_policies(d.model, d.utility, d.discount, x0, a.horizon, cls,
                               a.budget_atoms);
    write_output(a.out_path, mdp_oracle_json(r, cls));
    return 0;
}

int run_bandit(const CommonArgs& a) {
    BanditInstance inst = make_bandit(a.mu, a.grid);
    SolveOptions opts;
    opts.state_budget = a.budget_states;
    FiniteSolveResult r = solve_finite(inst.model, inst.utility, DiscountSpec::none(),
                                       inst.start, a.horizon, opts);
    const double analytic = bandit_analytic_value(a.horizon, 0.0, 0.0, a.mu);
    write_output(a.out_path, bandit_result_json(a.mu, a.horizon, a.grid, r.value, analytic));
    if (a.check && !(std::fabs(r.value - analytic) <= 1e-10))
        throw NumericError("bandit check failed: solver value " + std::to_string(r.value) +
                           " differs from the closed form " + std::to_string(analytic));
    return 0;
}

int run_validate(const CommonArgs& a) {
    ModelDocument doc = parse_model(read_file(a.model_path));
    const bool is_mdp = std::holds_alternative<MdpDocument>(doc);
    write_output(a.out_path, validate_result_json(is_mdp ? "mdp" : "pomdp"));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective risk-sensitive MDP and POMDP solver"};
    app.require_subcommand(1);
    CommonArgs a;

    auto add_model = [&a](CLI::App* sc) {
        sc->add_option("model", a.model_path, "model document (JSON)")->required();
    };
    auto add_output = [&a](CLI::App* sc) {
        sc->add_option("--out", a.out_path, "write the result here instead of stdout");
    };
    auto add_threads = [&a](CLI::App* sc) {
        return sc->add_option("--threads", a.threads,
                              "worker threads (default: MORSDP_THREADS, then hardware)");
    };

    CLI::App* solve = app.add_subcommand("solve", "finite-horizon optimum of an mdp model");
    add_model(solve);
    solve->add_option("--horizon,-n", a.horizon, "number of stages")->required();
    solve->add_option("--format", a.format, "output format (default json)")
        ->check(CLI::IsMember({"json", "csv"}));
    solve->add_option("--x0", a.x0_label, "start state label (default: first state)");
    solve->add_option("--budget-states", a.budget_states,
                      "cap on reachable augmented states (default 10000000)");
    solve->add_option("--dump-layers", a.dump_layers, "also write layer sizes as CSV here");
    CLI::Option* solve_threads = add_threads(solve);
    add_output(solve);

    CLI::App* sinf = app.add_subcommand(
        "solve-inf", "discounted infinite-horizon value with a bracket certificate");
    add_model(sinf);
    sinf->add_option("--tol", a.tol, "bracket-width stopping tolerance (default 1e-6)");
    sinf->add_option("--max-iter", a.max_iter, "iteration cap (default 500)");
    sinf->add_option("--format", a.format, "json result or csv iteration trace")
        ->check(CLI::IsMember({"json", "csv"}));
    sinf->add_option("--x0", a.x0_label, "start state label (default: first state)");
    sinf->add_option("--budget-states", a.budget_states,
                     "cap on reachable augmented states (default 10000000)");
    sinf->add_option("--dump-layers", a.dump_layers, "also write layer sizes as CSV here");
    CLI::Option* sinf_threads = add_threads(sinf);
    add_output(sinf);

    CLI::App* spomdp = app.add_subcommand(
        "solve-pomdp", "optimal observation-tree policy of a pomdp model");
    add_model(spomdp);
    spomdp->add_option("--horizon,-n", a.horizon, "number of stages")->required();
    spomdp->add_option("--theta0", a.theta0_text,
                       "initial hidden-state distribution, comma separated (default uniform)");
    spomdp->add_flag("--no-shift", a.no_shift, "skip the positivity cost shift");
    spomdp->add_option("--format", a.format, "output format (json only)")
        ->check(CLI::IsMember({"json", "csv"}));
    spomdp->add_option("--budget-states", a.budget_states,
                       "cap on reachable information states (default 10000000)");
    spomdp->add_option("--dump-layers", a.dump_layers, "also write layer sizes as CSV here");
    CLI::Option* spomdp_threads = add_threads(spomdp);
    add_output(spomdp);

    CLI::App* reduce = app.add_subcommand(
        "reduce", "export the reachable information MDP of a pomdp as a model document");
    add_model(reduce);
    reduce->add_option("--horizon,-n", a.horizon, "number of stages")->required();
    reduce->add_option("--theta0", a.theta0_text,
                       "initial hidden-state distribution, comma separated (default uniform)");
    reduce->add_option("--budget-states", a.budget_states,
                       "cap on reachable information states (default 10000000)");
    add_output(reduce);

    CLI::App* oracle = app.add_subcommand(
        "oracle", "exhaustive policy enumeration (exact reference values)");
    add_model(oracle);
    oracle->add_option("--horizon,-n", a.horizon, "number of stages")->required();
    oracle->add_option("--theta0", a.theta0_text,
                       "initial hidden-state distribution for pomdp models (default uniform)");
    oracle->add_option("--x0", a.x0_label, "start state label for mdp models");
    CLI::Option* cls_opt =
        oracle->add_option("--class", a.policy_class, "mdp policy class (default history)")
            ->check(CLI::IsMember({"markov", "history"}));
    oracle->add_option("--budget-atoms", a.budget_atoms,
                       "cap on enumerated path atoms (default 10000000)");
    add_output(oracle);

    CLI::App* bandit = app.add_subcommand(
        "bandit", "two-armed bandit demo: solver versus the closed form");
    bandit->add_option("--mu", a.mu, "silver weight in (0, 2] (default 1)");
    bandit->add_option("--horizon,-n", a.horizon, "number of pulls")->required();
    bandit->add_option("--grid", a.grid, "stake grid points on [0, 1] (default 5)");
    bandit->add_flag("--check", a.check, "exit nonzero if solver and closed form disagree");
    bandit->add_option("--budget-states", a.budget_states,
                       "cap on reachable augmented states (default 10000000)");
    add_output(bandit);

    CLI::App* validate = app.add_subcommand("validate", "parse and validate a model document");
    add_model(validate);
    add_output(validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "code:parse: " << e.what() << "\n";
        return 2;
    }

    try {
        if (solve->parsed() && *solve_threads) morsdp::set_thread_count(a.threads);
        if (sinf->parsed() && *sinf_threads) morsdp::set_thread_count(a.threads);
        if (spomdp->parsed() && *spomdp_threads) morsdp::set_thread_count(a.threads);

        if (solve->parsed()) return run_solve(a);
        if (sinf->parsed()) return run_solve_inf(a);
        if (spomdp->parsed()) return run_solve_pomdp(a);
        if (reduce->parsed()) return run_reduce(a);
        if (oracle->parsed()) return run_oracle(a, cls_opt->count() > 0);
        if (bandit->parsed()) return run_bandit(a);
        if (validate->parsed()) return run_validate(a);
        return 1;
    } catch (const morsdp::ParseError& e) {
        std::cerr << "code:parse: " << e.what() << "\n";
        return 2;
    } catch (const morsdp::ValidationError& e) {
        std::cerr << "code:validation: " << e.what() << "\n";
        return 2;
    } catch (const morsdp::DomainError& e) {
        std::cerr << "code:domain: " << e.what() << "\n";
        return 2;
    } catch (const morsdp::BudgetError& e) {
        std::cerr << "code:budget: " << e.what() << "\n";
        return 3;
    } catch (const morsdp::NumericError& e) {
        std::cerr << "code:numeric: " << e.what() << "\n";
        return 1;
    } catch (const morsdp::QueryError& e) {
        std::cerr << "code:query: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "code:internal: " << e.what() << "\n";
        return 1;
    }
}
