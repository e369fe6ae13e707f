#include "cpw/device.hpp"

#include "cpw/errors.hpp"
#include "cpw/units.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace cpw {

using nlohmann::json;

IndexMap::IndexMap(std::vector<int> cutoffs, int n_cells)
    : cutoffs_(std::move(cutoffs)), n_cells_(n_cells) {
    offsets_.reserve(cutoffs_.size());
    for (int m : cutoffs_) {
        offsets_.push_back(cell_size_);
        cell_size_ += m;
    }
}

int IndexMap::row(int cell, int site, int harmonic) const {
    if (cell < 0 || cell >= n_cells_ || site < 0 || site >= n_sites() || harmonic < 1 ||
        harmonic > cutoffs_[site])
        throw IndexError("index (" + std::to_string(cell) + ", " + std::to_string(site) + ", " +
                         std::to_string(harmonic) + ") out of range");
    return cell * cell_size_ + offsets_[site] + harmonic - 1;
}

IndexMap::Triple IndexMap::triple(int r) const {
    if (r < 0 || r >= size()) throw IndexError("row " + std::to_string(r) + " out of range");
    int cell = r / cell_size_;
    int local = r % cell_size_;
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), local);
    int site = static_cast<int>(it - offsets_.begin()) - 1;
    return {cell, site, local - offsets_[site] + 1};
}

static std::vector<int> cutoffs_of(const DeviceSpec& dev) {
    std::vector<int> m;
    for (const auto& r : dev.sites) m.push_back(r.mode_cutoff);
    return m;
}

IndexMap make_index_map(const DeviceSpec& dev) { return IndexMap(cutoffs_of(dev), dev.n_cells); }
IndexMap make_cell_index_map(const DeviceSpec& dev) { return IndexMap(cutoffs_of(dev), 1); }

double fundamental_frequency(const Geometry& g) {
    if (!(g.length > 0) || !(g.l_per_m > 0) || !(g.c_per_m > 0))
        throw DomainError("geometry values must be positive");
    return units::pi / (g.length * std::sqrt(g.l_per_m * g.c_per_m));
}

namespace {

// Path-aware JSON reader. Every accessed key is recorded so leftovers can be
// reported as unknown.
class Obj {
public:
    Obj(const json& j, std::string path, const LoadOptions& opts, std::vector<std::string>* warn)
        : j_(j), path_(std::move(path)), opts_(opts), warn_(warn) {
        if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& get(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ValidationError(at(key) + ": missing required key");
        return j_.at(key);
    }

    double number(const std::string& key) {
        const json& v = get(key);
        if (!v.is_number()) throw ValidationError(at(key) + ": expected a number");
        return v.get<double>();
    }

    double number_or(const std::string& key, double fallback) {
        return has(key) ? number(key) : (seen_.insert(key), fallback);
    }

    int integer(const std::string& key) {
        const json& v = get(key);
        if (!v.is_number_integer()) throw ValidationError(at(key) + ": expected an integer");
        return v.get<int>();
    }

    std::string string(const std::string& key) {
        const json& v = get(key);
        if (!v.is_string()) throw ValidationError(at(key) + ": expected a string");
        return v.get<std::string>();
    }

    bool boolean_or(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = get(key);
        if (!v.is_boolean()) throw ValidationError(at(key) + ": expected true or false");
        return v.get<bool>();
    }

    const json& array(const std::string& key) {
        const json& v = get(key);
        if (!v.is_array()) throw ValidationError(at(key) + ": expected an array");
        return v;
    }

    std::string at(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }
    const std::string& path() const { return path_; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (seen_.count(it.key())) continue;
            std::string msg = at(it.key()) + ": unknown key";
            if (!opts_.lenient) throw ValidationError(msg);
            if (warn_) warn_->push_back(msg);
        }
    }

private:
    const json& j_;
    std::string path_;
    const LoadOptions& opts_;
    std::vector<std::string>* warn_;
    std::set<std::string> seen_;
};

Parity parse_parity(const json& v, const std::string& path) {
    if (v.is_string()) {
        auto s = v.get<std::string>();
        if (s == "+") return Parity::plus;
        if (s == "-") return Parity::minus;
    }
    throw ValidationError(path + ": parity must be \"+\" or \"-\"");
}

int resolve_site(const json& v, const std::vector<ResonatorSpec>& sites, const std::string& path) {
    if (v.is_number_integer()) {
        int i = v.get<int>();
        if (i < 0 || i >= static_cast<int>(sites.size()))
            throw DanglingReference(path + ": no resonator with index " + std::to_string(i));
        return i;
    }
    if (v.is_string()) {
        auto id = v.get<std::string>();
        for (size_t i = 0; i < sites.size(); ++i)
            if (sites[i].id == id) return static_cast<int>(i);
        throw DanglingReference(path + ": no resonator with id '" + id + "'");
    }
    throw ValidationError(path + ": site must be an index or an id string");
}

EndRef parse_end(const json& v, const std::vector<ResonatorSpec>& sites, const std::string& path) {
    if (!v.is_array() || v.size() != 2) throw ValidationError(path + ": expected [site, parity]");
    return {resolve_site(v[0], sites, path + "[0]"), parse_parity(v[1], path + "[1]")};
}

CouplerSpec parse_coupler(const json& v, const std::vector<ResonatorSpec>& sites,
                          const std::string& path, bool inter, const LoadOptions& opts,
                          std::vector<std::string>* warn) {
    Obj o(v, path, opts, warn);
    CouplerSpec c;
    c.a = parse_end(o.get("a"), sites, o.at("a"));
    c.b = parse_end(o.get("b"), sites, o.at("b"));
    c.cc = o.number("cc_fF") * units::fF;
    c.cell_offset = inter ? (o.has("cell_offset") ? o.integer("cell_offset") : 1) : 0;
    o.finish();
    return c;
}

void check_positive(double v, const std::string& path) {
    if (!(v > 0) || !std::isfinite(v)) throw ValidationError(path + ": must be positive");
}

}  // namespace

static void validate_impl(DeviceSpec& dev, bool normalize);

DeviceSpec parse_device(const json& j, const LoadOptions& opts, std::vector<std::string>* warnings) {
    Obj top(j, "", opts, warnings);
    DeviceSpec dev;
    if (top.has("description")) dev.description = top.string("description");

    const json& cell_json = top.get("unit_cell");
    Obj cell(cell_json, "unit_cell", opts, warnings);
    const json& res = cell.array("resonators");
    if (res.empty()) throw ValidationError("unit_cell.resonators: at least one resonator required");
    for (size_t i = 0; i < res.size(); ++i) {
        Obj r(res[i], "unit_cell.resonators[" + std::to_string(i) + "]", opts, warnings);
        ResonatorSpec s;
        s.id = r.has("id") ? r.string("id") : "r" + std::to_string(i);
        s.c0 = r.number("c0_fF") * units::fF;
        s.l0 = r.number("l0_nH") * units::nH;
        s.mode_cutoff = r.integer("M");
        if (r.has("geometry")) {
            Obj g(r.get("geometry"), r.at("geometry"), opts, warnings);
            s.geometry = Geometry{g.number("length_m"), g.number("l_H_per_m"), g.number("c_F_per_m")};
            g.finish();
        }
        r.finish();
        dev.sites.push_back(s);
    }
    std::set<std::string> ids;
    for (size_t i = 0; i < dev.sites.size(); ++i)
        if (!ids.insert(dev.sites[i].id).second)
            throw ValidationError("unit_cell.resonators[" + std::to_string(i) + "].id: duplicate id");

    if (cell.has("couplers")) {
        const json& cs = cell.array("couplers");
        for (size_t i = 0; i < cs.size(); ++i)
            dev.couplers.push_back(parse_coupler(cs[i], dev.sites,
                                                 "unit_cell.couplers[" + std::to_string(i) + "]",
                                                 false, opts, warnings));
    }
    if (cell.has("transmons")) {
        const json& ts = cell.array("transmons");
        for (size_t i = 0; i < ts.size(); ++i) {
            Obj t(ts[i], "unit_cell.transmons[" + std::to_string(i) + "]", opts, warnings);
            TransmonSpec q;
            q.site = resolve_site(t.get("site"), dev.sites, t.at("site"));
            q.name = t.has("name") ? t.string("name") : "q" + std::to_string(i + 1);
            q.cell = t.has("cell") ? t.integer("cell") : -1;
            q.end = t.has("end") ? parse_parity(t.get("end"), t.at("end")) : Parity::plus;
            q.cq = t.number("cq_fF") * units::fF;
            q.ej0 = units::ghz_to_rad(t.number("ej0_GHz"));
            q.flux = t.number("flux");
            q.cc_prime = t.number("cc_prime_fF") * units::fF;
            t.finish();
            dev.transmons.push_back(q);
        }
    }
    cell.finish();

    if (top.has("inter_cell_couplers")) {
        const json& cs = top.array("inter_cell_couplers");
        for (size_t i = 0; i < cs.size(); ++i)
            dev.inter_cell.push_back(parse_coupler(cs[i], dev.sites,
                                                   "inter_cell_couplers[" + std::to_string(i) + "]",
                                                   true, opts, warnings));
    }
    dev.n_cells = top.has("n_cells") ? top.integer("n_cells") : 1;
    if (top.has("boundary")) {
        auto b = top.string("boundary");
        if (b == "open") dev.boundary = Boundary::open;
        else if (b == "periodic") dev.boundary = Boundary::periodic;
        else throw ValidationError("boundary: must be \"open\" or \"periodic\"");
    }
    if (top.has("reflection_permutation")) {
        const json& p = top.array("reflection_permutation");
        std::vector<int> perm;
        for (size_t i = 0; i < p.size(); ++i) {
            if (!p[i].is_number_integer())
                throw ValidationError("reflection_permutation[" + std::to_string(i) + "]: expected an integer");
            perm.push_back(p[i].get<int>());
        }
        dev.reflection = perm;
    }
    dev.loading_everywhere = top.boolean_or("transmon_loading_everywhere", false);
    dev.paddle_cc_prime = top.number_or("paddle_cc_prime_fF", 0.0) * units::fF;
    top.finish();

    for (auto& q : dev.transmons)
        if (q.cell < 0) q.cell = dev.n_cells / 2;

    validate_impl(dev, true);
    return dev;
}

DeviceSpec parse_device_text(const std::string& text, const LoadOptions& opts,
                             std::vector<std::string>* warnings) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed device JSON: ") + e.what());
    }
    return parse_device(j, opts, warnings);
}

DeviceSpec load_device(const std::string& path, const LoadOptions& opts,
                       std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open device file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_device_text(ss.str(), opts, warnings);
}

static json end_json(const EndRef& e) { return json::array({e.site, parity_str(e.parity)}); }

// Finds a file-unit value whose forward conversion reproduces the internal
// value bit for bit, so that serialize followed by load is lossless.
template <class Forward>
static double file_value(double internal, double guess, Forward forward) {
    if (forward(guess) == internal) return guess;
    double up = guess, down = guess;
    for (int i = 0; i < 16; ++i) {
        up = std::nextafter(up, HUGE_VAL);
        down = std::nextafter(down, -HUGE_VAL);
        if (forward(up) == internal) return up;
        if (forward(down) == internal) return down;
    }
    return guess;
}

static double to_ff(double c) {
    return file_value(c, c / units::fF, [](double x) { return x * units::fF; });
}
static double to_nh(double l) {
    return file_value(l, l / units::nH, [](double x) { return x * units::nH; });
}
static double to_ghz(double w) {
    return file_value(w, units::rad_to_ghz(w), [](double x) { return units::ghz_to_rad(x); });
}

json serialize(const DeviceSpec& dev) {
    json top = json::object();
    if (!dev.description.empty()) top["description"] = dev.description;
    json res = json::array();
    for (const auto& r : dev.sites) {
        json o = {{"id", r.id}, {"c0_fF", to_ff(r.c0)}, {"l0_nH", to_nh(r.l0)}, {"M", r.mode_cutoff}};
        if (r.geometry)
            o["geometry"] = {{"length_m", r.geometry->length},
                             {"l_H_per_m", r.geometry->l_per_m},
                             {"c_F_per_m", r.geometry->c_per_m}};
        res.push_back(o);
    }
    json cps = json::array();
    for (const auto& c : dev.couplers)
        cps.push_back({{"a", end_json(c.a)}, {"b", end_json(c.b)}, {"cc_fF", to_ff(c.cc)}});
    json tms = json::array();
    for (const auto& q : dev.transmons)
        tms.push_back({{"name", q.name},
                       {"site", q.site},
                       {"cell", q.cell},
                       {"end", parity_str(q.end)},
                       {"cq_fF", to_ff(q.cq)},
                       {"ej0_GHz", to_ghz(q.ej0)},
                       {"flux", q.flux},
                       {"cc_prime_fF", to_ff(q.cc_prime)}});
    top["unit_cell"] = {{"resonators", res}, {"couplers", cps}, {"transmons", tms}};
    json inter = json::array();
    for (const auto& c : dev.inter_cell)
        inter.push_back({{"a", end_json(c.a)},
                         {"b", end_json(c.b)},
                         {"cc_fF", to_ff(c.cc)},
                         {"cell_offset", c.cell_offset}});
    top["inter_cell_couplers"] = inter;
    top["n_cells"] = dev.n_cells;
    top["boundary"] = dev.boundary == Boundary::open ? "open" : "periodic";
    if (dev.reflection) top["reflection_permutation"] = *dev.reflection;
    top["transmon_loading_everywhere"] = dev.loading_everywhere;
    top["paddle_cc_prime_fF"] = to_ff(dev.paddle_cc_prime);
    return top;
}

std::string serialize_text(const DeviceSpec& dev) { return serialize(dev).dump(2) + "\n"; }

double site_loading(const DeviceSpec& dev, int site) {
    for (const auto& q : dev.transmons)
        if (q.site == site) return q.cc_prime;
    return dev.loading_everywhere ? dev.paddle_cc_prime : 0.0;
}

int site_degree(const DeviceSpec& dev, int site) {
    int n = 0;
    for (const auto* list : {&dev.couplers, &dev.inter_cell})
        for (const auto& c : *list) n += (c.a.site == site) + (c.b.site == site);
    return n;
}

namespace {

using EndKey = std::pair<int, int>;  // (site, parity bit)
using CouplerKey = std::tuple<EndKey, EndKey, int, double>;

EndKey key_of(const EndRef& e) { return {e.site, e.parity == Parity::minus ? 1 : 0}; }

CouplerKey canonical(EndKey a, EndKey b, int offset, double cc) {
    // Intra couplers are unordered pairs; inter couplers with offset -k are
    // the same bond as offset +k read in reverse.
    if (offset < 0) {
        std::swap(a, b);
        offset = -offset;
    }
    if (offset == 0 && b < a) std::swap(a, b);
    return {a, b, offset, cc};
}

std::multiset<CouplerKey> coupler_set(const DeviceSpec& dev, const std::vector<int>* perm,
                                      const std::vector<bool>* flip) {
    auto map_end = [&](const EndRef& e) {
        EndKey k = key_of(e);
        if (perm) {
            int s = e.site;
            k = {(*perm)[s], (*flip)[s] ? 1 - k.second : k.second};
        }
        return k;
    };
    std::multiset<CouplerKey> out;
    for (const auto* list : {&dev.couplers, &dev.inter_cell})
        for (const auto& c : *list) out.insert(canonical(map_end(c.a), map_end(c.b), c.cell_offset, c.cc));
    return out;
}

}  // namespace

std::optional<Reflection> reflection_of(const DeviceSpec& dev) {
    if (!dev.reflection) return std::nullopt;
    const auto& perm = *dev.reflection;
    const int s = dev.n_sites();
    if (s > 20) throw ValidationError("reflection_permutation: unit cells above 20 sites are not supported");
    auto original = coupler_set(dev, nullptr, nullptr);
    // A site that maps to a different site carries its loading with it, so
    // loading must match along the permutation; the flips are then the
    // cheapest assignment (fewest end swaps, lowest mask) reproducing the couplers.
    std::optional<Reflection> best;
    int best_count = s + 1;
    for (unsigned mask = 0; mask < (1u << s); ++mask) {
        int count = __builtin_popcount(mask);
        if (count >= best_count) continue;
        std::vector<bool> flip(s);
        for (int i = 0; i < s; ++i) flip[i] = (mask >> i) & 1u;
        if (coupler_set(dev, &perm, &flip) == original) {
            best = Reflection{perm, flip};
            best_count = count;
        }
    }
    if (!best)
        throw ValidationError("reflection_permutation: permuted couplers do not reproduce the coupler set");
    return best;
}

static void validate_impl(DeviceSpec& dev, bool normalize) {
    const int s = dev.n_sites();
    if (s == 0) throw ValidationError("unit_cell.resonators: at least one resonator required");
    for (int i = 0; i < s; ++i) {
        const auto& r = dev.sites[i];
        std::string p = "unit_cell.resonators[" + std::to_string(i) + "]";
        check_positive(r.c0, p + ".c0_fF");
        check_positive(r.l0, p + ".l0_nH");
        if (r.mode_cutoff < 1) throw ValidationError(p + ".M: must be >= 1");
        if (r.geometry) {
            double w_geom;
            try {
                w_geom = fundamental_frequency(*r.geometry);
            } catch (const DomainError&) {
                throw ValidationError(p + ".geometry: values must be positive");
            }
            double w_lumped = 1.0 / std::sqrt(r.l0 * r.c0);
            if (std::abs(w_geom - w_lumped) > 1e-12 * w_lumped)
                throw ValidationError(p + ".geometry: fundamental frequency disagrees with 1/sqrt(L0 C0)");
        }
    }
    if (dev.n_cells < 1) throw ValidationError("n_cells: must be >= 1");

    auto check_coupler = [&](const CouplerSpec& c, const std::string& p, bool inter) {
        for (const auto* e : {&c.a, &c.b})
            if (e->site < 0 || e->site >= s) throw DanglingReference(p + ": endpoint references a missing resonator");
        check_positive(c.cc, p + ".cc_fF");
        if (!inter && c.a.site == c.b.site) throw ValidationError(p + ": self-coupling is forbidden");
        if (inter && c.cell_offset == 0) throw ValidationError(p + ".cell_offset: must be nonzero");
        if (inter && dev.boundary == Boundary::periodic && c.a.site == c.b.site &&
            dev.n_cells % c.cell_offset == 0 && std::abs(c.cell_offset) >= dev.n_cells)
            throw ValidationError(p + ": wraps onto the same resonator (self-coupling)");
        if (inter && dev.boundary == Boundary::periodic && c.a.site == c.b.site && dev.n_cells == 1)
            throw ValidationError(p + ": wraps onto the same resonator (self-coupling)");
    };
    for (size_t i = 0; i < dev.couplers.size(); ++i)
        check_coupler(dev.couplers[i], "unit_cell.couplers[" + std::to_string(i) + "]", false);
    for (size_t i = 0; i < dev.inter_cell.size(); ++i)
        check_coupler(dev.inter_cell[i], "inter_cell_couplers[" + std::to_string(i) + "]", true);

    if (dev.paddle_cc_prime < 0) throw ValidationError("paddle_cc_prime_fF: must be >= 0");
    std::map<int, Parity> transmon_end;
    std::set<std::string> names;
    for (size_t i = 0; i < dev.transmons.size(); ++i) {
        auto& q = dev.transmons[i];
        std::string p = "unit_cell.transmons[" + std::to_string(i) + "]";
        if (q.site < 0 || q.site >= s) throw DanglingReference(p + ".site: missing resonator");
        if (q.cell < 0 || q.cell >= dev.n_cells) throw ValidationError(p + ".cell: out of range");
        check_positive(q.cq, p + ".cq_fF");
        check_positive(q.ej0, p + ".ej0_GHz");
        if (!(q.cc_prime >= 0)) throw ValidationError(p + ".cc_prime_fF: must be >= 0");
        if (!std::isfinite(q.flux)) throw ValidationError(p + ".flux: must be finite");
        if (!names.insert(q.name).second) throw ValidationError(p + ".name: duplicate name");
        auto [it, inserted] = transmon_end.emplace(q.site, q.end);
        if (!inserted && it->second != q.end)
            throw ValidationError(p + ".end: conflicts with another transmon on the same resonator");
        for (const auto& other : dev.transmons)
            if (&other != &q && other.site == q.site && other.cc_prime != q.cc_prime)
                throw ValidationError(p + ".cc_prime_fF: transmons on one site must share C_c'");
    }

    // Gauge normalization: transmons always sit on the + end.
    for (auto& [site, end] : transmon_end) {
        if (end == Parity::plus) continue;
        if (!normalize) throw ValidationError("transmon on a - end; load through parse_device to normalize");
        for (auto* list : {&dev.couplers, &dev.inter_cell})
            for (auto& c : *list)
                for (auto* e : {&c.a, &c.b})
                    if (e->site == site) e->parity = flipped(e->parity);
        for (auto& q : dev.transmons)
            if (q.site == site) q.end = Parity::plus;
    }

    if (dev.reflection) {
        const auto& perm = *dev.reflection;
        if (static_cast<int>(perm.size()) != s)
            throw ValidationError("reflection_permutation: length must equal the number of sites");
        for (int i = 0; i < s; ++i) {
            if (perm[i] < 0 || perm[i] >= s)
                throw ValidationError("reflection_permutation[" + std::to_string(i) + "]: out of range");
        }
        for (int i = 0; i < s; ++i)
            if (perm[perm[i]] != i) throw ValidationError("reflection_permutation: must be an involution");
        for (int i = 0; i < s; ++i) {
            const auto &a = dev.sites[i], &b = dev.sites[perm[i]];
            if (a.c0 != b.c0 || a.l0 != b.l0 || a.mode_cutoff != b.mode_cutoff)
                throw ValidationError("reflection_permutation: maps resonator " + std::to_string(i) +
                                      " onto one with different elements");
        }
        reflection_of(dev);
    }
}

void validate(const DeviceSpec& dev) {
    DeviceSpec copy = dev;
    validate_impl(copy, false);
}

DeviceSpec with_cutoff(DeviceSpec dev, int mode_cutoff) {
    if (mode_cutoff < 1) throw ValidationError("mode cutoff must be >= 1");
    for (auto& r : dev.sites) {
        r.mode_cutoff = mode_cutoff;
    }
    return dev;
}

DeviceSpec with_elements(DeviceSpec dev, double c0, double l0, double cc, double cc_prime) {
    for (auto& r : dev.sites) {
        r.c0 = c0;
        r.l0 = l0;
        r.geometry.reset();
    }
    for (auto* list : {&dev.couplers, &dev.inter_cell})
        for (auto& c : *list) c.cc = cc;
    for (auto& q : dev.transmons) q.cc_prime = cc_prime;
    if (dev.loading_everywhere) dev.paddle_cc_prime = cc_prime;
    validate(dev);
    return dev;
}

DeviceSpec with_flux(DeviceSpec dev, const std::string& transmon, double flux) {
    for (auto& q : dev.transmons)
        if (q.name == transmon) {
            q.flux = flux;
            return dev;
        }
    throw DanglingReference("no transmon named '" + transmon + "'");
}

}  // namespace cpw
