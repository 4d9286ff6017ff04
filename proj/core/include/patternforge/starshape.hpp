#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace patternforge {

// Real-harmonic basis on S^{N-1}, N = 2 or 3, orthonormal w.r.t. the surface
// measure. N = 2: {1/sqrt(2pi), cos(k th)/sqrt(pi), sin(k th)/sqrt(pi)};
// N = 3: real spherical harmonics on a Gauss-Legendre (latitude) x uniform
// (longitude) grid. The basis band K is the grid capacity; shapes restrict
// themselves to lower degrees.
class StarBasis {
  public:
    StarBasis(int N, int res1, int res2 = 0); // N=2: res1 = ntheta; N=3: nlat, nlon

    int ambient() const { return n_; }
    int kmax() const { return kmax_; }
    std::size_t dim() const { return dim_; }
    std::size_t grid_size() const { return gsize_; }

    // unit direction of grid node i (length N), quadrature weight on S^{N-1}
    std::array<double, 3> dir(std::size_t i) const;
    double weight(std::size_t i) const { return w_[i]; }

    std::vector<double> synth(const std::vector<double>& c) const;
    std::vector<double> analyze(const std::vector<double>& grid) const;
    double eval(const std::vector<double>& c, const std::array<double, 3>& dir) const;

    int degree_of(std::size_t idx) const;
    // index of (k, m-type); N=2: m = 0 cosine, 1 sine (k >= 1)
    std::size_t index(int k, int m) const;

    // tangential gradient on the grid: g1 = d/dtheta (colatitude for N=3,
    // the angle for N=2), g2 = (1/sin theta) d/dphi (N=3 only, empty for N=2)
    void gradient(const std::vector<double>& c, std::vector<double>& g1,
                  std::vector<double>& g2) const;
    // Laplace-Beltrami in coefficient space: multiply by -k(k+N-2)
    std::vector<double> laplacian(const std::vector<double>& c) const;

    // even-degree projection (drops odd degrees); max odd-degree coefficient
    double odd_mass(const std::vector<double>& c) const;
    void project_even(std::vector<double>& c) const;

  private:
    int n_, kmax_;
    std::size_t dim_, gsize_;
    int res1_, res2_;
    std::vector<double> w_;
    std::vector<double> xlat_; // cos(theta) nodes (N=3)
    // cached synthesis tables
    std::vector<double> plm_;  // N=3: normalized P bar at lat nodes [lat][k][m]
    std::vector<double> dplm_; // d/dtheta of the above
    std::size_t plm_index(int lat, int k, int m) const;
};

// phi: S^{N-1} -> (0, inf), even, band-limited to degree kband
struct StarShape {
    int N = 2;
    int kband = 16;
    std::vector<double> coeff; // against StarBasis(N, ...), truncated to kband

    double min_radius(const StarBasis& basis) const;
};

// round shape of radius R
StarShape round_shape(const StarBasis& basis, int kband, double R);

} // namespace patternforge
