#pragma once

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cpw {

enum class Parity { plus, minus };

// Sign of harmonic j's flux at a resonator end: +1 at the + end, (-1)^j at the - end.
inline int end_sign(int j, Parity p) { return (p == Parity::plus || j % 2 == 0) ? 1 : -1; }
inline Parity flipped(Parity p) { return p == Parity::plus ? Parity::minus : Parity::plus; }
inline const char* parity_str(Parity p) { return p == Parity::plus ? "+" : "-"; }

struct Geometry {
    double length = 0;   // m
    double l_per_m = 0;  // H/m
    double c_per_m = 0;  // F/m
    bool operator==(const Geometry&) const = default;
};

struct ResonatorSpec {
    std::string id;
    double c0 = 0;  // F
    double l0 = 0;  // H
    int mode_cutoff = 1;
    std::optional<Geometry> geometry;
    bool operator==(const ResonatorSpec&) const = default;
};

struct EndRef {
    int site = 0;
    Parity parity = Parity::plus;
    bool operator==(const EndRef&) const = default;
};

// Intra-cell couplers have cell_offset 0. Inter-cell couplers join end a in
// cell n to end b in cell n + cell_offset.
struct CouplerSpec {
    EndRef a;
    EndRef b;
    double cc = 0;  // F
    int cell_offset = 0;
    bool operator==(const CouplerSpec&) const = default;
};

struct TransmonSpec {
    std::string name;
    int site = 0;
    int cell = 0;
    Parity end = Parity::plus;  // always + after loading
    double cq = 0;        // F
    double ej0 = 0;       // rad/s
    double flux = 0;      // units of the flux quantum
    double cc_prime = 0;  // F
    bool operator==(const TransmonSpec&) const = default;
};

enum class Boundary { open, periodic };

struct DeviceSpec {
    std::string description;
    std::vector<ResonatorSpec> sites;
    std::vector<CouplerSpec> couplers;
    std::vector<CouplerSpec> inter_cell;
    std::vector<TransmonSpec> transmons;
    int n_cells = 1;
    Boundary boundary = Boundary::open;
    std::optional<std::vector<int>> reflection;
    bool loading_everywhere = false;
    double paddle_cc_prime = 0;  // F, loading used where no transmon sits

    int n_sites() const { return static_cast<int>(sites.size()); }
    bool operator==(const DeviceSpec&) const = default;
};

// Flat row layout: cell-major, then site, then harmonic ascending.
class IndexMap {
public:
    struct Triple {
        int cell, site, harmonic;
        bool operator==(const Triple&) const = default;
    };

    IndexMap() = default;
    IndexMap(std::vector<int> cutoffs, int n_cells);

    int n_cells() const { return n_cells_; }
    int n_sites() const { return static_cast<int>(cutoffs_.size()); }
    int cell_size() const { return cell_size_; }
    int size() const { return cell_size_ * n_cells_; }
    int cutoff(int site) const { return cutoffs_[site]; }
    int site_offset(int site) const { return offsets_[site]; }
    int row(int cell, int site, int harmonic) const;
    Triple triple(int row) const;

private:
    std::vector<int> cutoffs_;
    std::vector<int> offsets_;
    int cell_size_ = 0;
    int n_cells_ = 0;
};

IndexMap make_index_map(const DeviceSpec& dev);
IndexMap make_cell_index_map(const DeviceSpec& dev);

struct LoadOptions {
    bool lenient = false;
};

DeviceSpec parse_device(const nlohmann::json& j, const LoadOptions& opts = {},
                        std::vector<std::string>* warnings = nullptr);
DeviceSpec parse_device_text(const std::string& text, const LoadOptions& opts = {},
                             std::vector<std::string>* warnings = nullptr);
DeviceSpec load_device(const std::string& path, const LoadOptions& opts = {},
                       std::vector<std::string>* warnings = nullptr);
nlohmann::json serialize(const DeviceSpec& dev);
std::string serialize_text(const DeviceSpec& dev);

// Checks every invariant of a device built in code; throws like the loader does.
void validate(const DeviceSpec& dev);

double fundamental_frequency(const Geometry& g);

// C_c' attached to the + end of a unit-cell site, identical in every cell.
double site_loading(const DeviceSpec& dev, int site);

// Coupler ends touching a site in the infinite lattice (both ends counted).
int site_degree(const DeviceSpec& dev, int site);

// Reflection as a site permutation plus per-site end swaps, so that mapped
// couplers reproduce the original multiset.
struct Reflection {
    std::vector<int> perm;
    std::vector<bool> flip;
};
std::optional<Reflection> reflection_of(const DeviceSpec& dev);

// Parameter rewrites used by sweeps.
DeviceSpec with_cutoff(DeviceSpec dev, int mode_cutoff);
DeviceSpec with_elements(DeviceSpec dev, double c0, double l0, double cc, double cc_prime);
DeviceSpec with_flux(DeviceSpec dev, const std::string& transmon, double flux);

}  // namespace cpw
