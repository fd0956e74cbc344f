#include "CLI11.hpp"
#include "json.hpp"

#include "svflow/acceptance.hpp"
#include "svflow/jacobi.hpp"
#include "svflow/stability.hpp"
#include "svflow/study.hpp"
#include "svflow/vertex_classify.hpp"

#include <fstream>
#include <iostream>

using json = nlohmann::json;

namespace {

svf::Mesh load_mesh(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open mesh file: " + path);
    return svf::Mesh::read(is);
}

json load_json(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    return json::parse(is);
}

int cmd_mesh_info(const std::string& path)
{
    const svf::Mesh m = load_mesh(path);
    const svf::VertexClassification c(m);
    std::cout << "vertices:        " << m.n_vertices() << "\n"
              << "triangles:       " << m.n_triangles() << "\n"
              << "edges:           " << m.n_edges() << "\n"
              << "boundary edges:  " << m.boundary_edges().size() << "\n"
              << "total area:      " << m.total_area() << "\n"
              << "enclosed:        " << (m.enclosed() ? "yes" : "no") << "\n";
    std::cout << "singular vertices:";
    for (int v : c.singular_vertices()) std::cout << ' ' << v;
    if (c.singular_vertices().empty()) std::cout << " none";
    std::cout << "\n";
    const auto cond = c.check_mesh_conditions();
    std::cout << "xi_T:            " << c.xi_mesh() << "\n"
              << "conditions:      M1=" << (cond.M1 ? "ok" : "FAIL")
              << " M2=" << (cond.M2 ? "ok" : "FAIL")
              << " M3=" << (cond.M3 ? "ok" : "FAIL") << "\n";
    return 0;
}

int cmd_infsup(const std::string& path, int N, double p, unsigned seed)
{
    const svf::Mesh m = load_mesh(path);
    const svf::InfSupReport r =
        (p == 2.0) ? svf::infsup_p2(m, N)
                   : svf::infsup_general_p_upper(m, N, p, 3, seed);
    std::cout << "N=" << r.N << " p=" << r.p << " beta=" << r.beta
              << " kind=" << r.kind << " xi_T=" << r.xi_T
              << (r.degraded ? " (degraded ascent)" : "") << "\n";
    return 0;
}

int cmd_projnorm(int N, double p, unsigned seed)
{
    const auto r = svf::projection_lp_norm(N, p, seed);
    std::cout << "N=" << r.N << " p=" << r.p << " norm=" << r.norm_estimate
              << " method=" << r.method << "\n";
    return 0;
}

int cmd_jacobi_decay(int m, double p, int Nmax, double alpha)
{
    std::vector<int> Ns;
    std::vector<double> vals;
    for (int N = std::max(2 * m + 2, 4); N <= Nmax; ++N) {
        const double v = svf::zeta_lp_norm(m, N, alpha, p);
        Ns.push_back(N);
        vals.push_back(v);
        std::cout << "N=" << N << " norm=" << v << "\n";
    }
    if (Ns.size() >= 3)
        std::cout << "fitted exponent: " << svf::fit_decay_exponent(Ns, vals)
                  << " (reference -2(1+1/p) = " << -2.0 * (1.0 + 1.0 / p)
                  << ")\n";
    return 0;
}

int cmd_rank_check(const std::string& path, int N)
{
    const svf::Mesh m = load_mesh(path);
    const auto r = svf::verify_div_surjectivity(m, N);
    std::cout << "rank(B) = " << r.rank_B << ", dim(Q) = " << r.dim_Q
              << ", deficiency = " << r.dim_Q - r.rank_B
              << (r.equal ? " (surjective)" : " (NOT surjective)") << "\n";
    return 0;
}

int cmd_pstokes(const std::string& cfg_path)
{
    const json j = load_json(cfg_path);
    const double p = j.value("p", 2.0);
    const double nu = j.value("nu", 1.0);
    const int degree = j.value("degree", 4);
    const int refinements = j.value("refinements", 0);
    const std::string solution = j.value("solution", "smooth");

    svf::Mesh m = svf::unit_square_initial();
    for (int i = 0; i < refinements; ++i) m = svf::uniform_refine(m);
    svf::VelocitySpace V(m, degree, true);
    svf::PressureSpace Q(m, degree - 1, m.enclosed());
    const svf::PowerLaw law(p, nu, j.value("eps_reg", 1e-10));
    const svf::ManufacturedSolution sol = svf::manufactured(solution, p);
    svf::SolverConfig scfg;
    scfg.max_iters = j.value("max_newton_iters", 50);
    scfg.quad_bump = j.value("quad_bump", 0);

    try {
        const svf::PStokesSolution s = svf::newton_solve(V, Q, sol, law, scfg);
        const svf::ErrorMetrics e = svf::error_metrics(s, sol, law);
        std::cout << "newton iterations: " << s.newton_iterations << "\n"
                  << "final residual:    " << s.residual_history.back() << "\n"
                  << "div residual:      " << s.div_residual << "\n"
                  << "e_u_w1p=" << e.e_u_w1p << " e_S=" << e.e_S
                  << " e_F=" << e.e_F << " e_q=" << e.e_q
                  << (e.absolute ? " (absolute)" : "") << "\n";
    } catch (const svf::NewtonDivergenceError& err) {
        std::cout << "solver diverged: " << err.what() << "\n";
        for (double r : err.residual_history) std::cout << "  " << r << "\n";
        return 1;
    }
    return 0;
}

int cmd_study(const std::string& cfg_path, const std::string& out)
{
    const json j = load_json(cfg_path);
    svf::StudyConfig cfg;
    cfg.method = j.value("method", cfg.method);
    cfg.solution = j.value("solution", cfg.solution);
    cfg.p = j.value("p", cfg.p);
    cfg.nu = j.value("nu", cfg.nu);
    cfg.N = j.value("N", cfg.N);
    cfg.N_max = j.value("N_max", cfg.N_max);
    cfg.levels = j.value("levels", cfg.levels);
    cfg.base_refinements = j.value("base_refinements", cfg.base_refinements);
    cfg.seed = j.value("seed", cfg.seed);

    const auto records = svf::run_convergence_study(cfg);
    svf::emit_csv(records, out + ".csv");
    svf::emit_svg_plot(records, out + ".svg");
    std::cout << "wrote " << out << ".csv and " << out << ".svg ("
              << records.size() << " records)\n";
    for (const std::string metric : {"e_u_w1p", "e_S", "e_F", "e_q"}) {
        try {
            const auto f = svf::fit_rate(records, metric);
            std::cout << metric << ": gamma = " << f.gamma << " ("
                      << f.points_used << " points)\n";
        } catch (const std::runtime_error&) {
            std::cout << metric << ": not enough usable records\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"high-order divergence-free Stokes / power-law flow toolkit"};
    app.require_subcommand(1);
    unsigned seed = 42;
    app.add_option("--seed", seed, "random seed")->capture_default_str();

    std::string mesh_path, cfg_path, out_prefix = "study";
    int N = 4, jm = 1, Nmax = 32;
    double p = 2.0, alpha = 4.0;

    auto* info = app.add_subcommand("mesh-info", "mesh statistics");
    info->add_option("--mesh", mesh_path, "mesh file")->required();

    auto* infsup = app.add_subcommand("infsup", "inf-sup constant");
    infsup->add_option("--mesh", mesh_path, "mesh file")->required();
    infsup->add_option("--N", N, "velocity degree")->capture_default_str();
    infsup->add_option("--p", p, "exponent")->capture_default_str();

    auto* proj = app.add_subcommand("projnorm", "projection operator norm");
    proj->add_option("--N", N, "polynomial degree")->capture_default_str();
    proj->add_option("--p", p, "exponent (inf for the max norm)")
        ->capture_default_str();

    auto* jac = app.add_subcommand("jacobi-decay",
                                   "boundary-mode norm decay in the degree");
    jac->add_option("--m", jm, "interpolation order")->capture_default_str();
    jac->add_option("--p", p, "norm exponent")->capture_default_str();
    jac->add_option("--Nmax", Nmax, "largest degree")->capture_default_str();
    jac->add_option("--alpha", alpha, "weight exponent")->capture_default_str();

    auto* rank = app.add_subcommand("rank-check", "divergence operator rank");
    rank->add_option("--mesh", mesh_path, "mesh file")->required();
    rank->add_option("--N", N, "velocity degree")->capture_default_str();

    auto* pst = app.add_subcommand("pstokes", "solve one power-law problem");
    pst->add_option("--config", cfg_path, "JSON config")->required();

    auto* study = app.add_subcommand("study", "convergence study -> CSV + SVG");
    study->add_option("--config", cfg_path, "JSON config")->required();
    study->add_option("--out", out_prefix, "output prefix")
        ->capture_default_str();

    auto* accept = app.add_subcommand("accept", "run the acceptance checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (info->parsed()) return cmd_mesh_info(mesh_path);
        if (infsup->parsed()) return cmd_infsup(mesh_path, N, p, seed);
        if (proj->parsed()) return cmd_projnorm(N, p, seed);
        if (jac->parsed()) return cmd_jacobi_decay(jm, p, Nmax, alpha);
        if (rank->parsed()) return cmd_rank_check(mesh_path, N);
        if (pst->parsed()) return cmd_pstokes(cfg_path);
        if (study->parsed()) return cmd_study(cfg_path, out_prefix);
        if (accept->parsed())
            return svf::run_acceptance(std::cout) == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
