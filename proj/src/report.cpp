#include "nahmtx/report.hpp"

#include "nahmtx/errors.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nahmtx {

using nlohmann::json;
namespace fs = std::filesystem;

RunConfig RunConfig::from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    RunConfig c;
    try {
        if (j.contains("tau"))
            c.tau = cplx(j["tau"][0].get<double>(), j["tau"][1].get<double>());
        if (j.contains("xi0")) {
            c.xi0_1 = j["xi0"][0];
            c.xi0_2 = j["xi0"][1];
        }
        c.k_target = j.value("k_target", c.k_target);
        c.field_cutoff = j.value("field_cutoff", c.field_cutoff);
        c.spinor_cutoff = j.value("spinor_cutoff", c.spinor_cutoff);
        if (j.contains("plane")) {
            c.R = j["plane"].value("R", c.R);
            c.M = j["plane"].value("M", c.M);
        }
        if (j.contains("relax")) {
            c.relax_steps = j["relax"].value("steps", c.relax_steps);
            c.relax_step_size = j["relax"].value("step_size", c.relax_step_size);
        }
        if (j.contains("scan")) {
            c.scan_count = j["scan"].value("count", c.scan_count);
            c.scan_radius = j["scan"].value("radius", c.scan_radius);
        }
        if (j.contains("transform_grid")) {
            c.transform_count = j["transform_grid"].value("count", c.transform_count);
            c.transform_radius = j["transform_grid"].value("radius", c.transform_radius);
        }
        c.delta_punct = j.value("delta_punct", c.delta_punct);
        c.delta_xi = j.value("delta_xi", c.delta_xi);
        c.green_tol = j.value("green_tol", c.green_tol);
        if (j.contains("pole")) {
            c.pole_rays = j["pole"].value("rays", c.pole_rays);
            if (j["pole"].contains("radii"))
                c.pole_radii = j["pole"]["radii"].get<std::vector<double>>();
        }
        if (j.contains("degree")) {
            c.degree_grid = j["degree"].value("grid", c.degree_grid);
            c.degree_excision = j["degree"].value("excision", c.degree_excision);
            c.degree_circle_points = j["degree"].value("circle_points", c.degree_circle_points);
        }
        c.seed = j.value("seed", c.seed);
        c.out_dir = j.value("out", c.out_dir);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config fields: ") + e.what());
    }
    c.validate();
    return c;
}

std::string RunConfig::to_json() const
{
    json j;
    j["tau"] = {tau.real(), tau.imag()};
    j["xi0"] = {xi0_1, xi0_2};
    j["k_target"] = k_target;
    j["field_cutoff"] = field_cutoff;
    j["spinor_cutoff"] = spinor_cutoff;
    j["plane"] = {{"R", R}, {"M", M}};
    j["relax"] = {{"steps", relax_steps}, {"step_size", relax_step_size}};
    j["scan"] = {{"count", scan_count}, {"radius", scan_radius}};
    j["transform_grid"] = {{"count", transform_count}, {"radius", transform_radius}};
    j["delta_punct"] = delta_punct;
    j["delta_xi"] = delta_xi;
    j["green_tol"] = green_tol;
    j["pole"] = {{"rays", pole_rays}, {"radii", pole_radii}};
    j["degree"] = {{"grid", degree_grid},
                   {"excision", degree_excision},
                   {"circle_points", degree_circle_points}};
    j["seed"] = seed;
    j["out"] = out_dir;
    return j.dump(2) + "\n";
}

void RunConfig::validate() const
{
    if (tau.imag() <= 0)
        throw ConfigError("config: Im(tau) must be positive");
    if (normalize(xi0_1, xi0_2).is_trivial)
        throw ConfigError("config: xi0 must be a nontrivial character");
    if (field_cutoff < 1 || spinor_cutoff < 1)
        throw ConfigError("config: cutoffs must be >= 1");
    if (M < 8 || M % 2 != 0)
        throw ConfigError("config: plane M must be even and >= 8");
    if (R <= 0)
        throw ConfigError("config: plane R must be positive");
    if (k_target < 0)
        throw ConfigError("config: k_target must be >= 0");
    if (delta_punct <= 0 || delta_xi <= 0)
        throw ConfigError("config: delta_punct and delta_xi must be positive");
    for (std::size_t i = 1; i < pole_radii.size(); ++i)
        if (pole_radii[i] >= pole_radii[i - 1])
            throw ConfigError("config: pole radii must decrease");
    if (!pole_radii.empty() &&
        (pole_radii.back() <= delta_punct || pole_radii.front() >= 0.3))
        throw ConfigError("config: pole radii must lie in (delta_punct, 0.3)");
}

FieldShape RunConfig::field_shape() const
{
    FieldShape s;
    s.lat = TorusLattice{tau};
    s.N = field_cutoff;
    s.R = R;
    s.M = M;
    return s;
}

TransformOptions RunConfig::transform_options() const
{
    TransformOptions t;
    t.spinor_cutoff = spinor_cutoff;
    t.delta_xi = delta_xi;
    t.green_tol = green_tol;
    t.kernel.k_expected = k_target;
    t.kernel.delta_punct = delta_punct;
    return t;
}

std::vector<JacobianPoint> RunConfig::scan_points() const
{
    std::vector<JacobianPoint> pts;
    auto xi0 = normalize(xi0_1, xi0_2);
    for (int i = 0; i < scan_count; ++i) {
        double th = 2.0 * M_PI * (i + 0.13) / scan_count;
        pts.push_back(normalize(xi0.x1 + scan_radius * std::cos(th),
                                xi0.x2 + scan_radius * std::sin(th)));
    }
    return pts;
}

std::vector<JacobianPoint> RunConfig::transform_points() const
{
    std::vector<JacobianPoint> pts;
    auto xi0 = normalize(xi0_1, xi0_2);
    auto neg = xi0.neg();
    int placed = 0;
    double radius = transform_radius;
    for (int i = 0; placed < transform_count && i < 8 * transform_count; ++i) {
        double th = 2.0 * M_PI * (i + 0.41) / transform_count;
        auto p = normalize(xi0.x1 + radius * std::cos(th), xi0.x2 + radius * std::sin(th));
        if (p.dist(xi0) < delta_punct || p.dist(neg) < delta_punct)
            continue;
        pts.push_back(p);
        ++placed;
    }
    return pts;
}

std::string RunManifest::to_json() const
{
    json j;
    j["config_hash"] = config_hash;
    j["version"] = version;
    j["acceptance_failed"] = acceptance_failed;
    j["stages"] = json::array();
    for (const auto& s : stages) {
        json e;
        e["name"] = s.name;
        e["seconds"] = s.seconds;
        e["ok"] = s.ok;
        if (!s.summary.empty())
            e["summary"] = json::parse(s.summary);
        j["stages"].push_back(e);
    }
    j["warnings"] = warnings;
    j["files"] = json::array();
    for (const auto& [name, hash] : files) {
        j["files"].push_back({{"name", name}, {"hash", hash}});
    }
    return j.dump(2) + "\n";
}

namespace {

struct StageTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double lap()
    {
        auto t1 = std::chrono::steady_clock::now();
        double s = std::chrono::duration<double>(t1 - t0).count();
        t0 = t1;
        return s;
    }
};

std::string color_of(double t)
{
    // blue (low) -> red (high), t clamped to [0,1]
    t = std::clamp(t, 0.0, 1.0);
    int r = static_cast<int>(40 + 215 * t);
    int g = static_cast<int>(60 + 40 * (1 - std::fabs(2 * t - 1)));
    int b = static_cast<int>(255 - 215 * t);
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace

std::string svg_eigenvalue_trajectories(const std::vector<std::array<double, 2>>& points)
{
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
          "viewBox=\"0 0 640 480\">\n";
    os << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    os << "<text x=\"20\" y=\"24\" font-family=\"monospace\" font-size=\"14\">log10 "
          "|eig(Phi)| vs log10 dist(xi, puncture)</text>\n";
    if (points.empty()) {
        os << "<text x=\"260\" y=\"240\" font-family=\"monospace\" font-size=\"16\">no "
              "data</text>\n</svg>\n";
        return os.str();
    }
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : points) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    if (xmax - xmin < 1e-12) {
        xmax += 1;
        xmin -= 1;
    }
    if (ymax - ymin < 1e-12) {
        ymax += 1;
        ymin -= 1;
    }
    auto X = [&](double x) { return 60 + (x - xmin) / (xmax - xmin) * 540; };
    auto Y = [&](double y) { return 430 - (y - ymin) / (ymax - ymin) * 380; };
    os << "<line x1=\"60\" y1=\"430\" x2=\"600\" y2=\"430\" stroke=\"black\"/>\n";
    os << "<line x1=\"60\" y1=\"50\" x2=\"60\" y2=\"430\" stroke=\"black\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"#c03020\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : points)
        os << fmt_double(X(p[0])) << "," << fmt_double(Y(p[1])) << " ";
    os << "\"/>\n";
    for (const auto& p : points)
        os << "<circle cx=\"" << fmt_double(X(p[0])) << "\" cy=\"" << fmt_double(Y(p[1]))
           << "\" r=\"3\" fill=\"#c03020\"/>\n";
    os << "</svg>\n";
    return os.str();
}

std::string svg_residual_heatmap(const std::vector<std::array<double, 4>>& samples,
                                 double punct1_x, double punct1_y, double punct2_x,
                                 double punct2_y)
{
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"560\" "
          "viewBox=\"0 0 560 560\">\n";
    os << "<rect width=\"560\" height=\"560\" fill=\"white\"/>\n";
    os << "<text x=\"20\" y=\"24\" font-family=\"monospace\" font-size=\"14\">Hitchin residual "
          "log10 over the dual torus</text>\n";
    auto X = [&](double x) { return 40 + x * 480; };
    auto Y = [&](double y) { return 520 - y * 480; };
    os << "<rect x=\"40\" y=\"40\" width=\"480\" height=\"480\" fill=\"none\" "
          "stroke=\"black\"/>\n";
    if (samples.empty()) {
        os << "<text x=\"230\" y=\"280\" font-family=\"monospace\" font-size=\"16\">no "
              "data</text>\n";
    } else {
        double lo = 1e300, hi = -1e300;
        for (const auto& s : samples) {
            double v = std::log10(std::max(1e-300, s[2] + s[3]));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo < 1e-12)
            hi = lo + 1;
        for (const auto& s : samples) {
            double v = std::log10(std::max(1e-300, s[2] + s[3]));
            os << "<circle cx=\"" << fmt_double(X(s[0])) << "\" cy=\"" << fmt_double(Y(s[1]))
               << "\" r=\"9\" fill=\"" << color_of((v - lo) / (hi - lo)) << "\"/>\n";
        }
    }
    for (auto [px, py] : {std::pair<double, double>{punct1_x, punct1_y}, {punct2_x, punct2_y}}) {
        os << "<text x=\"" << fmt_double(X(px) - 5) << "\" y=\"" << fmt_double(Y(py) + 5)
           << "\" font-family=\"monospace\" font-size=\"16\" fill=\"black\">x</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

namespace {

void emit(RunManifest& man, const std::string& dir, const std::string& name,
          const std::string& body)
{
    write_file(dir + "/" + name, body);
    man.files.emplace_back(name, fnv1a_hex(body));
}

} // namespace

RunManifest run_pipeline(const RunConfig& cfg)
{
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    RunManifest man;
    man.version = "nahmtx 0.1.0";
    std::string cfg_json = cfg.to_json();
    man.config_hash = fnv1a_hex(cfg_json);
    emit(man, cfg.out_dir, "config.json", cfg_json);

    StageTimer timer;
    auto xi0 = normalize(cfg.xi0_1, cfg.xi0_2);

    // gen
    auto field = synth_ansatz(cfg.field_shape(), cfg.k_target, xi0);
    {
        json s;
        s["charge"] = charge(field);
        man.stages.push_back({"gen-instanton", timer.lap(), s.dump(), true});
    }
    save_ntf1(field, cfg.out_dir + "/field.ntf");
    man.files.emplace_back("field.ntf", fnv1a_hex(read_file(cfg.out_dir + "/field.ntf")));

    // relax
    ConnectionField relaxed = field;
    if (cfg.k_target > 0 && cfg.relax_steps > 0) {
        auto r = asd_relax(field, cfg.relax_steps, cfg.relax_step_size);
        relaxed = std::move(r.field);
        json s;
        s["eps_initial"] = r.info.eps_initial;
        s["eps_final"] = r.info.eps_final;
        s["steps_accepted"] = r.info.steps_accepted;
        s["stalled"] = r.info.stalled;
        man.stages.push_back({"relax", timer.lap(), s.dump(), !r.info.stalled});
        if (r.info.stalled)
            man.warnings.push_back("relaxation stalled");
    }
    save_ntf1(relaxed, cfg.out_dir + "/relaxed.ntf");
    man.files.emplace_back("relaxed.ntf", fnv1a_hex(read_file(cfg.out_dir + "/relaxed.ntf")));
    if (fs::exists(cfg.out_dir + "/relaxed.ntf.meta.json"))
        man.files.emplace_back("relaxed.ntf.meta.json",
                               fnv1a_hex(read_file(cfg.out_dir + "/relaxed.ntf.meta.json")));
    if (fs::exists(cfg.out_dir + "/field.ntf.meta.json"))
        man.files.emplace_back("field.ntf.meta.json",
                               fnv1a_hex(read_file(cfg.out_dir + "/field.ntf.meta.json")));

    // charge + asymptotics
    auto crep = charge_report(relaxed);
    {
        json s;
        s["charge"] = crep.charge;
        s["energy"] = crep.energy;
        s["eps_asd"] = crep.eps_asd;
        man.stages.push_back({"charge", timer.lap(), s.dump(), true});
    }
    json asym_json;
    try {
        auto arep = asymptotic_state(relaxed);
        asym_json["xi_estimate"] = {arep.xi_estimate.x1, arep.xi_estimate.x2};
        asym_json["flat_residual"] = arep.flat_residual;
        asym_json["decay_sup"] = arep.decay_sup;
        man.stages.push_back({"asymptotic-state", timer.lap(), asym_json.dump(), true});
    } catch (const AsymptoticExtractionFailed& e) {
        asym_json["error"] = e.what();
        man.stages.push_back({"asymptotic-state", timer.lap(), asym_json.dump(), false});
        man.warnings.push_back(e.what());
    }

    json summary;
    summary["charge"] = crep.charge;
    summary["energy"] = crep.energy;
    summary["eps_asd"] = crep.eps_asd;
    summary["asymptotic"] = asym_json;

    // index scan
    std::vector<IndexSample> scan;
    if (cfg.k_target >= 0) {
        auto opts = cfg.transform_options();
        scan = index_scan(relaxed, cfg.spinor_cutoff, cfg.scan_points(), opts.kernel);
        emit(man, cfg.out_dir, "index_scan.csv", index_scan_csv(scan));
        json s;
        s["dims"] = json::array();
        bool uniform = true;
        for (const auto& smp : scan) {
            s["dims"].push_back(smp.dim);
            if (smp.dim != cfg.k_target)
                uniform = false;
        }
        s["uniform"] = uniform;
        man.stages.push_back({"dirac-scan", timer.lap(), s.dump(), true});
        if (!uniform)
            man.warnings.push_back("index scan saw a dimension deviation");
        summary["index_scan"] = s;
    }

    // transform grid
    std::vector<HiggsSample> samples;
    if (cfg.k_target > 0) {
        FrameCache cache(relaxed, cfg.transform_options());
        std::ostringstream csv;
        csv << higgs_csv_header(cfg.k_target);
        double h1max = 0, h2max = 0, xerr = 0;
        for (const auto& xi : cfg.transform_points()) {
            auto smp = transform_point(cache, xi);
            csv << higgs_csv_row(smp);
            h1max = std::max(h1max, smp.hitchin_1);
            h2max = std::max(h2max, smp.hitchin_2);
            xerr = std::max(xerr, smp.fb_cross_err);
            samples.push_back(std::move(smp));
        }
        emit(man, cfg.out_dir, "transform.csv", csv.str());
        json s;
        s["hitchin_1_max"] = h1max;
        s["hitchin_2_max"] = h2max;
        s["fb_cross_err_max"] = xerr;
        man.stages.push_back({"transform", timer.lap(), s.dump(), true});
        summary["transform"] = s;

        // pole scans at both punctures
        json poles = json::array();
        std::ostringstream polecsv;
        polecsv << "puncture,angle,order,correlation,re_residue,im_residue\n";
        for (const auto& pc : {xi0, xi0.neg()}) {
            try {
                auto rep = pole_scan(cache, pc, cfg.pole_rays, cfg.pole_radii);
                json p;
                p["puncture"] = {pc.x1, pc.x2};
                p["residue_rank"] = rep.residue_rank;
                p["semisimple"] = rep.semisimple;
                p["rays"] = json::array();
                for (const auto& ray : rep.rays) {
                    p["rays"].push_back({{"angle", ray.angle},
                                         {"order", ray.order},
                                         {"correlation", ray.correlation},
                                         {"residue", {ray.residue_eig.real(),
                                                      ray.residue_eig.imag()}}});
                    polecsv << fmt_double(pc.x1) << ";" << fmt_double(pc.x2) << ","
                            << fmt_double(ray.angle) << "," << fmt_double(ray.order) << ","
                            << fmt_double(ray.correlation) << ","
                            << fmt_double(ray.residue_eig.real()) << ","
                            << fmt_double(ray.residue_eig.imag()) << "\n";
                }
                poles.push_back(p);
            } catch (const PoleFitInconclusive& e) {
                poles.push_back({{"puncture", {pc.x1, pc.x2}}, {"error", e.what()}});
                man.warnings.push_back(e.what());
            }
        }
        emit(man, cfg.out_dir, "poles.csv", polecsv.str());
        summary["poles"] = poles;
        man.stages.push_back({"scan-poles", timer.lap(), poles.dump(), true});

        // degree diagnostic
        auto deg = degree_estimate(cache, cfg.degree_grid, cfg.degree_excision,
                                   cfg.degree_circle_points);
        json dj;
        dj["estimate"] = deg.estimate;
        dj["bulk"] = deg.bulk;
        dj["boundary"] = deg.boundary;
        dj["uncertainty"] = deg.uncertainty;
        man.stages.push_back({"degree", timer.lap(), dj.dump(), true});
        summary["degree"] = dj;
    } else {
        emit(man, cfg.out_dir, "transform.csv", higgs_csv_header(0));
        man.stages.push_back({"transform", timer.lap(), "{\"empty\":true}", true});
    }

    emit(man, cfg.out_dir, "summary.json", summary.dump(2) + "\n");

    // plots from the emitted CSVs
    render_plots(cfg.out_dir);
    for (const char* f : {"trajectories.svg", "residual_heatmap.svg"})
        man.files.emplace_back(f, fnv1a_hex(read_file(cfg.out_dir + "/" + std::string(f))));
    man.stages.push_back({"report", timer.lap(), "", true});

    write_file(cfg.out_dir + "/manifest.json", man.to_json());
    return man;
}

void render_plots(const std::string& run_dir)
{
    std::string transform_csv = run_dir + "/transform.csv";
    if (!fs::exists(transform_csv))
        throw MissingArtifact("render_plots: " + transform_csv + " not found");

    // punctures (for distances and markers) from the run config when present
    double p1x = 0.3, p1y = 0.2;
    if (fs::exists(run_dir + "/config.json")) {
        auto j = json::parse(read_file(run_dir + "/config.json"));
        if (j.contains("xi0")) {
            p1x = j["xi0"][0];
            p1y = j["xi0"][1];
        }
    }
    auto p1 = normalize(p1x, p1y);
    auto p2 = p1.neg();

    std::vector<std::array<double, 4>> samples;
    std::vector<std::array<double, 2>> eigtraj; // (log10 dist, log10 |phi|)
    {
        std::ifstream in(transform_csv);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
                cells.push_back(cell);
            if (cells.size() < 5)
                continue;
            double x1 = std::stod(cells[0]);
            double x2 = std::stod(cells[1]);
            double h1 = std::stod(cells[cells.size() - 3]);
            double h2 = std::stod(cells[cells.size() - 2]);
            samples.push_back({x1, x2, h1, h2});
            if (cells.size() >= 7) {
                double re = std::stod(cells[3]);
                double im = std::stod(cells[4]);
                auto q = normalize(x1, x2);
                double dist = std::min(q.dist(p1), q.dist(p2));
                eigtraj.push_back({std::log10(std::max(1e-6, dist)),
                                   std::log10(std::max(1e-300, std::hypot(re, im)))});
            }
        }
    }
    std::sort(eigtraj.begin(), eigtraj.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
    write_file(run_dir + "/trajectories.svg", svg_eigenvalue_trajectories(eigtraj));
    write_file(run_dir + "/residual_heatmap.svg",
               svg_residual_heatmap(samples, p1.x1, p1.x2, p2.x1, p2.x2));
}

} // namespace nahmtx
