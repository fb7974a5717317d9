#pragma once

#include "nahmtx/field.hpp"
#include "nahmtx/nahm.hpp"

#include <string>
#include <vector>

namespace nahmtx {

// Full-pipeline configuration; JSON round-trips through parse/serialize.
struct RunConfig {
    cplx tau{0.0, 1.0};
    double xi0_1 = 0.3, xi0_2 = 0.2;
    int k_target = 1;
    int field_cutoff = 8;   // torus grid of the connection field (2N+1 sites)
    int spinor_cutoff = 6;  // torus mode cutoff of the Dirac machinery
    double R = 4.0;
    int M = 48;
    int relax_steps = 500;
    double relax_step_size = 1e-5;
    int scan_count = 8;         // index-scan ring samples
    double scan_radius = 0.2;   // ring radius around xi0
    int transform_count = 12;   // transform-grid ring samples
    double transform_radius = 0.22;
    double delta_punct = 0.05;
    double delta_xi = 0.01;
    double green_tol = 1e-8;
    int pole_rays = 4;
    std::vector<double> pole_radii{0.24, 0.17, 0.12, 0.085};
    int degree_grid = 10;
    double degree_excision = 0.18;
    int degree_circle_points = 16;
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";

    static RunConfig from_json(const std::string& text); // throws ConfigError
    std::string to_json() const;
    void validate() const; // throws ConfigError

    FieldShape field_shape() const;
    TransformOptions transform_options() const;
    std::vector<JacobianPoint> scan_points() const;
    std::vector<JacobianPoint> transform_points() const;
};

struct StageRecord {
    std::string name;
    double seconds = 0.0;
    std::string summary; // compact JSON fragment
    bool ok = true;
};

struct RunManifest {
    std::string config_hash;
    std::string version;
    std::vector<StageRecord> stages;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, std::string>> files; // name, content hash
    bool acceptance_failed = false;

    std::string to_json() const;
};

// Execute gen -> relax -> charge -> asymptotics -> index scan -> transform ->
// poles -> degree -> reports, writing artifacts under cfg.out_dir.
RunManifest run_pipeline(const RunConfig& cfg);

// Regenerate the SVG plots from the CSV artifacts in run_dir.
void render_plots(const std::string& run_dir); // throws MissingArtifact

// Plot primitives shared by run_pipeline and the CLI `report`/`plot` paths.
std::string svg_eigenvalue_trajectories(const std::vector<std::array<double, 2>>& points);
std::string svg_residual_heatmap(const std::vector<std::array<double, 4>>& samples,
                                 double punct1_x, double punct1_y, double punct2_x,
                                 double punct2_y);

} // namespace nahmtx
