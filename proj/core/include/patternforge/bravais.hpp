#pragma once

#include <array>
#include <vector>

namespace patternforge {

// M-dimensional Bravais lattice embedded in R^N (N = 2, 3). M = 0 models the
// empty lattice (no image points).
struct BravaisLattice {
    int N = 2;
    int M = 1;
    std::vector<std::array<double, 3>> basis; // M vectors, trailing components 0

    static BravaisLattice line(int N, double a = 1.0);     // Z * a e1
    static BravaisLattice square(int N, double a = 1.0);   // Z^2 in the e1-e2 plane
    static BravaisLattice cubic(double a = 1.0);           // Z^3 in R^3
    static BravaisLattice empty(int N);

    void validate() const;

    // all nonzero lattice points with |p| <= radius (symmetric set)
    std::vector<std::array<double, 3>> points_within(double radius) const;
    // shell decomposition: sorted distinct radii with multiplicities
    std::vector<std::pair<double, int>> shells(double radius) const;
    double min_norm() const; // shortest nonzero vector (0 for empty lattice)
};

} // namespace patternforge
