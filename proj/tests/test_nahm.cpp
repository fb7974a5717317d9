#include "doctest.h"

#include "nahmtx/errors.hpp"
#include "nahmtx/nahm.hpp"

#include <cmath>

using namespace nahmtx;

namespace {

FieldShape flat_shape()
{
    FieldShape s;
    s.lat = TorusLattice::square();
    s.N = 2;
    s.R = 4.0;
    s.M = 16;
    return s;
}

TransformOptions small_opts()
{
    TransformOptions t;
    t.spinor_cutoff = 2;
    t.delta_xi = 0.01;
    t.kernel.k_expected = 0;
    return t;
}

} // namespace

TEST_CASE("transform of a flat field is the vacuous sample")
{
    auto f = synth_ansatz(flat_shape(), 0, normalize(0.3, 0.2));
    FrameCache cache(f, small_opts());
    auto smp = transform_point(cache, normalize(0.1, 0.6));
    CHECK(smp.dim == 0);
    CHECK(smp.Phi.rows == 0);
    auto [h1, h2] = hitchin_residual(smp);
    CHECK(h1 == 0.0);
    CHECK(h2 == 0.0);
    CHECK(higgs_csv_row(smp).substr(0, 4) != "");
}

TEST_CASE("pole_scan validates its radii")
{
    auto f = synth_ansatz(flat_shape(), 0, normalize(0.3, 0.2));
    FrameCache cache(f, small_opts());
    CHECK_THROWS_AS(pole_scan(cache, f.xi0, 2, {0.2, 0.15}), InvalidParameter);
    CHECK_THROWS_AS(pole_scan(cache, f.xi0, 2, {0.1, 0.15, 0.2}), InvalidParameter);
}

TEST_CASE("degree of the flat field vanishes")
{
    auto f = synth_ansatz(flat_shape(), 0, normalize(0.3, 0.2));
    FrameCache cache(f, small_opts());
    auto rep = degree_estimate(cache, 6, 0.18, 8);
    CHECK(std::fabs(rep.estimate) < 0.2);
    CHECK(rep.uncertainty > 0.0);
}

TEST_CASE("gauge_compare on identical flat fields is exact")
{
    auto f = synth_ansatz(flat_shape(), 0, normalize(0.3, 0.2));
    auto pts = std::vector<JacobianPoint>{normalize(0.1, 0.6), normalize(0.6, 0.1)};
    auto rep = gauge_compare(f, f, pts, small_opts());
    REQUIRE(rep.size() == 2);
    for (const auto& p : rep) {
        CHECK(p.spectrum_dist == 0.0);
        CHECK(p.fb_norm_ratio == doctest::Approx(1.0));
    }
}

TEST_CASE("csv header matches the k x k entry layout")
{
    CHECK(higgs_csv_header(1) ==
          "xi1,xi2,dim,re_phi_00,im_phi_00,hitchin_1,hitchin_2,fb_cross_err\n");
    CHECK(higgs_csv_header(0) == "xi1,xi2,dim,hitchin_1,hitchin_2,fb_cross_err\n");
}
