#pragma once

#include "cpw/circuit.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <vector>

namespace cpw {

struct NormalModeSet {
    Eigen::VectorXd freqs;        // rad/s, ascending
    Eigen::VectorXd d;            // eigenvalues of K, freqs = 1/sqrt(d)
    Eigen::MatrixXd vecs;         // row m is mode m in rescaled coordinates
    Eigen::MatrixXd end_weights;  // W = L^{-1/2} V^T, column m maps mode m to bare fluxes
    Eigen::VectorXi parity;       // +1 even, -1 odd, 0 mixed or no reflection data
    IndexMap index_map;
    std::shared_ptr<const DeviceSpec> meta;
};

NormalModeSet solve_modes(const CircuitMatrices& mats);

// Physical flux weight of a normal mode at one resonator end.
double end_flux(const NormalModeSet& modes, int mode_index, int cell, int site, Parity parity);

// Reflection as a signed permutation of the rows of a single cell (cells = 1)
// or of the whole lattice.
Eigen::MatrixXd reflection_matrix(const DeviceSpec& dev, const Reflection& r, int cells);

// Canonical basis for clusters of (near-)degenerate eigenvectors. Vectors are
// columns; values are sorted ascending. Clusters are split by the reflection
// eigenspaces when a reflection operator is given, then orthonormalized in
// lexicographic order and sign fixed so the first significant entry is positive.
// Returns the parity label of every column.
template <class Matrix>
Eigen::VectorXi canonicalize_clusters(const Eigen::VectorXd& values, Matrix& vecs,
                                      const Eigen::MatrixXd* reflection, double rel_gap);

struct BlochSolution {
    Eigen::VectorXd freqs;  // ascending
    Eigen::MatrixXcd vecs;  // columns, rescaled coordinates
};

// Dense Hermitian solve of K(k) = L^{-1/2} C(k) L^{-1/2}.
BlochSolution solve_bloch(const BlochBlocks& blocks, double k, bool want_vectors);

// Eigenfrequencies of C(k) through Sylvester inertia counts. Only needs the
// end capacitances and the per-site oscillator sums, so each count costs
// O(S M + S^3) instead of a dense (S M)^3 solve.
class InertiaSolver {
public:
    explicit InertiaSolver(const DeviceSpec& dev);

    // Number of normal-mode frequencies strictly below omega at momentum k.
    int count_below(double omega, double k) const;

    // Frequencies with ascending indices [first, first + count) at momentum k.
    Eigen::VectorXd frequencies(double k, int first, int count, double guess) const;

private:
    struct Site {
        double c0, l0;
        int cutoff;
    };
    std::vector<Site> sites_;
    Eigen::MatrixXd g_onsite_, g_hop_;
    int total_ = 0;
};

}  // namespace cpw
