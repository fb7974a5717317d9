// nahmtx command line: spectra, Bessel checks, flat solves, instanton
// generation and relaxation, Dirac index scans, the transform pipeline and
// report rendering.
//
// Exit codes: 0 ok, 1 acceptance-stage failure, 2 configuration error,
// 3 solver error.

#include "nahmtx/bessel.hpp"
#include "nahmtx/coupled.hpp"
#include "nahmtx/errors.hpp"
#include "nahmtx/field.hpp"
#include "nahmtx/flat_dirac.hpp"
#include "nahmtx/kern.hpp"
#include "nahmtx/nahm.hpp"
#include "nahmtx/report.hpp"
#include "nahmtx/spectrum.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace nahmtx;

namespace {

RunConfig load_config(const std::string& path, const std::string& out_override,
                      std::uint64_t seed_override, bool seed_set)
{
    RunConfig cfg;
    if (!path.empty())
        cfg = RunConfig::from_json(read_file(path));
    if (!out_override.empty())
        cfg.out_dir = out_override;
    if (seed_set)
        cfg.seed = seed_override;
    return cfg;
}

int bessel_check()
{
    double l1 = k0_l1_norm();
    double worst_ode = 0.0;
    for (double r : {0.5, 2.0, 10.0}) {
        const double h = 3e-4;
        double d2 = (k0(r + h) - 2.0 * k0(r) + k0(r - h)) / (h * h);
        double d1 = (k0(r + h) - k0(r - h)) / (2.0 * h);
        worst_ode = std::max(worst_ode, std::fabs(d2 + d1 / r - k0(r)));
    }
    double r20 = 20.0;
    double expn = std::sqrt(M_PI / 2) * std::exp(-r20) / std::sqrt(r20) *
                  (1.0 - 1.0 / (8 * r20) + 9.0 / (128 * r20 * r20));
    double asym_rel = std::fabs(k0(r20) - expn) / expn;
    std::printf("K0(1)            = %.15f\n", k0(1.0));
    std::printf("||K0||_L1        = %.12f   (2 pi = %.12f)\n", l1, 2 * M_PI);
    std::printf("ode residual max = %.3e\n", worst_ode);
    std::printf("asymptotic rel   = %.3e at r = 20\n", asym_rel);
    bool ok = std::fabs(l1 - 2 * M_PI) < 1e-8 && worst_ode < 1e-6 && asym_rel < 1e-4;
    std::printf("%s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"nahmtx: Nahm transform workbench for doubly-periodic fields"};
    app.require_subcommand(1);

    std::string config_path, out_dir, in_path;
    std::uint64_t seed = 1;
    int threads = 1;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON config path")->expected(1);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "deterministic seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--threads", threads, "worker threads");

    // spectrum
    auto* sp = app.add_subcommand("spectrum", "twisted torus spectrum CSV");
    double sp_xi1 = 0.5, sp_xi2 = 0.0, sp_tau_re = 0.0, sp_tau_im = 1.0;
    int sp_cutoff = 4;
    sp->add_option("--xi1", sp_xi1);
    sp->add_option("--xi2", sp_xi2);
    sp->add_option("--cutoff", sp_cutoff);
    sp->add_option("--tau-re", sp_tau_re);
    sp->add_option("--tau-im", sp_tau_im);

    auto* bc = app.add_subcommand("bessel-check", "verify the K0 ground truths");

    // flat-solve
    auto* fsv = app.add_subcommand("flat-solve", "invert the flat-model Dirac operator");
    double fl_xi1 = 0.3, fl_xi2 = 0.2, fl_R = 5.0;
    int fl_N = 2, fl_M = 32;
    fsv->add_option("--xi1", fl_xi1);
    fsv->add_option("--xi2", fl_xi2);
    fsv->add_option("--cutoff", fl_N);
    fsv->add_option("--M", fl_M);
    fsv->add_option("--R", fl_R);

    auto* gen = app.add_subcommand("gen-instanton", "synthesize a charge-k field (NTF1)");
    auto* rel = app.add_subcommand("relax", "gradient-flow relax a field toward ASD");
    auto* chg = app.add_subcommand("charge", "Chern-Weil charge of a field");
    auto* dsc = app.add_subcommand("dirac-scan", "kernel-dimension scan over xi samples");
    auto* trf = app.add_subcommand("transform", "Nahm transform over the xi grid");
    auto* pol = app.add_subcommand("scan-poles", "pole structure at the punctures");
    auto* rep = app.add_subcommand("report", "regenerate plots and summary from CSVs");
    auto* run = app.add_subcommand("run", "full pipeline");
    for (auto* sub : {gen, rel, chg, dsc, trf, pol})
        sub->add_option("--in", in_path, "NTF1 field path");
    int rel_steps = -1;
    rel->add_option("--steps", rel_steps, "override relax steps");

    CLI11_PARSE(app, argc, argv);
    set_worker_threads(threads);

    try {
        if (sp->parsed()) {
            TorusLattice lat{cplx(sp_tau_re, sp_tau_im)};
            auto s = twisted_spectrum(lat, normalize(sp_xi1, sp_xi2), sp_cutoff);
            std::string csv = s.to_csv();
            if (out_dir.empty())
                std::fputs(csv.c_str(), stdout);
            else {
                std::filesystem::create_directories(out_dir);
                write_file(out_dir + "/spectrum.csv", csv);
            }
            return 0;
        }
        if (bc->parsed())
            return bessel_check();
        if (fsv->parsed()) {
            SpinorShape shape;
            shape.lat = TorusLattice::square();
            shape.N = fl_N;
            shape.R = fl_R;
            shape.M = fl_M;
            shape.rank = 1;
            auto op = FlatDiracOp::make(shape, normalize(fl_xi1, fl_xi2));
            Rng rng(seed);
            auto target = random_spinor(rng, Chirality::Plus, shape, 0.4);
            auto sol = op.invert(target);
            auto back = op.apply(sol);
            back -= target;
            std::printf("relative residual of D* Q_inf = %.3e\n", back.norm() / target.norm());
            return back.norm() < 1e-8 * target.norm() ? 0 : 3;
        }

        RunConfig cfg = load_config(config_path, out_dir, seed, seed_set);

        if (gen->parsed()) {
            auto field = synth_ansatz(cfg.field_shape(), cfg.k_target,
                                      normalize(cfg.xi0_1, cfg.xi0_2));
            std::string path = in_path.empty() ? cfg.out_dir + "/field.ntf" : in_path;
            std::filesystem::create_directories(
                std::filesystem::path(path).parent_path().string().empty()
                    ? "."
                    : std::filesystem::path(path).parent_path().string());
            save_ntf1(field, path);
            std::printf("wrote %s (charge %.4f)\n", path.c_str(), charge(field));
            return 0;
        }
        if (rel->parsed()) {
            if (in_path.empty())
                throw ConfigError("relax: --in field.ntf required");
            auto field = load_ntf1(in_path);
            auto r = asd_relax(field, rel_steps > 0 ? rel_steps : cfg.relax_steps,
                               cfg.relax_step_size);
            save_ntf1(r.field, in_path + ".relaxed.ntf");
            std::printf("eps %.4f -> %.4f over %d accepted steps%s; wrote %s\n",
                        r.info.eps_initial, r.info.eps_final, r.info.steps_accepted,
                        r.info.stalled ? " (stalled)" : "", (in_path + ".relaxed.ntf").c_str());
            return r.info.stalled ? 3 : 0;
        }
        if (chg->parsed()) {
            if (in_path.empty())
                throw ConfigError("charge: --in field.ntf required");
            auto field = load_ntf1(in_path);
            auto repc = charge_report(field);
            std::printf("{\"charge\": %s, \"energy\": %s, \"eps_asd\": %s}\n",
                        fmt_double(repc.charge).c_str(), fmt_double(repc.energy).c_str(),
                        fmt_double(repc.eps_asd).c_str());
            return 0;
        }
        if (dsc->parsed()) {
            if (in_path.empty())
                throw ConfigError("dirac-scan: --in field.ntf required");
            auto field = load_ntf1(in_path);
            auto opts = cfg.transform_options();
            auto scan = index_scan(field, cfg.spinor_cutoff, cfg.scan_points(), opts.kernel);
            std::string csv = index_scan_csv(scan);
            if (cfg.out_dir.empty())
                std::fputs(csv.c_str(), stdout);
            else {
                std::filesystem::create_directories(cfg.out_dir);
                write_file(cfg.out_dir + "/index_scan.csv", csv);
            }
            return 0;
        }
        if (trf->parsed()) {
            if (in_path.empty())
                throw ConfigError("transform: --in field.ntf required");
            auto field = load_ntf1(in_path);
            FrameCache cache(field, cfg.transform_options());
            std::ostringstream csv;
            csv << higgs_csv_header(cfg.k_target);
            for (const auto& xi : cfg.transform_points())
                csv << higgs_csv_row(transform_point(cache, xi));
            std::filesystem::create_directories(cfg.out_dir);
            write_file(cfg.out_dir + "/transform.csv", csv.str());
            std::printf("wrote %s/transform.csv\n", cfg.out_dir.c_str());
            return 0;
        }
        if (pol->parsed()) {
            if (in_path.empty())
                throw ConfigError("scan-poles: --in field.ntf required");
            auto field = load_ntf1(in_path);
            FrameCache cache(field, cfg.transform_options());
            auto xi0 = normalize(cfg.xi0_1, cfg.xi0_2);
            for (const auto& pc : {xi0, xi0.neg()}) {
                auto prep = pole_scan(cache, pc, cfg.pole_rays, cfg.pole_radii);
                std::printf("puncture (%.3f, %.3f): rank %d, semisimple %s\n", pc.x1, pc.x2,
                            prep.residue_rank, prep.semisimple ? "yes" : "no");
                for (const auto& ray : prep.rays)
                    std::printf("  ray %.3f: order %.3f corr %.4f residue %.5f%+.5fi\n",
                                ray.angle, ray.order, ray.correlation, ray.residue_eig.real(),
                                ray.residue_eig.imag());
            }
            return 0;
        }
        if (rep->parsed()) {
            std::string dir = cfg.out_dir;
            render_plots(dir);
            std::printf("plots written under %s\n", dir.c_str());
            return 0;
        }
        if (run->parsed()) {
            auto man = run_pipeline(cfg);
            std::printf("%s\n", man.to_json().c_str());
            return man.acceptance_failed ? 1 : 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const InvalidParameter& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const MissingArtifact& e) {
        std::fprintf(stderr, "missing artifact: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    }
    return 0;
}
