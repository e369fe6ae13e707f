#pragma once

#include "cpw/device.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>

namespace cpw {

struct CircuitMatrices {
    Eigen::MatrixXd cap;      // F
    Eigen::VectorXd ind_inv;  // j^2 / L0, 1/H
    IndexMap index_map;
    std::shared_ptr<const DeviceSpec> meta;
};

// Lagrangian matrices of the whole finite lattice.
CircuitMatrices build_matrices(const DeviceSpec& dev);

// Coupling capacitances between resonator ends, indexed 2*site + (end is -).
// The mode capacitance matrix is C0 on the diagonal plus U G U^T, where U
// carries the end signs of every harmonic.
struct EndCapacitance {
    Eigen::MatrixXd onsite;  // within one cell
    Eigen::MatrixXd hop;     // end in cell n to end in cell n+1
};

EndCapacitance end_capacitance(const DeviceSpec& dev);

struct BlochBlocks {
    Eigen::MatrixXd onsite;
    Eigen::MatrixXd hop;
    Eigen::VectorXd ind_inv;
    IndexMap index_map;  // single cell
};

BlochBlocks bloch_blocks(const DeviceSpec& dev);

// Block-circulant (periodic) or block-tridiagonal (open) tiling of the blocks.
Eigen::MatrixXd assemble_from_blocks(const BlochBlocks& blocks, int n_cells, Boundary boundary);

// Symbol C(k) = onsite + hop e^{ik} + hop^T e^{-ik}, exactly Hermitian.
Eigen::MatrixXcd bloch_cap(const BlochBlocks& blocks, double k);

// Nonzero entries as "row,col,value" with 17 significant digits.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

}  // namespace cpw
