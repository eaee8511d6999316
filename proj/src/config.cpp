#include "viscomem/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

namespace viscomem {

namespace {

/// Reads keys from one JSON object and rejects the ones nobody asked for.
class Block {
public:
    Block(const nlohmann::json& parent, const std::string& key, const std::string& path)
        : path_(path.empty() ? key : path + "." + key) {
        if (!parent.contains(key)) {
            j_ = nlohmann::json::object();
        } else if (!parent.at(key).is_object()) {
            throw ConfigError("config: '" + path_ + "' must be an object");
        } else {
            j_ = parent.at(key);
        }
    }
    Block(const nlohmann::json& root) : j_(root), path_("") {
        if (!root.is_object()) throw ConfigError("config: top level must be an object");
    }

    template <class T>
    T get(const std::string& key, const T& fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: '" + name(key) + "' has the wrong type");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    void mark(const std::string& key) { seen_.insert(key); }
    const nlohmann::json& raw() const { return j_; }
    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + name(it.key()) + "'");
        }
    }

private:
    nlohmann::json j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
}

bool is_multiple(double x, double h) {
    const double q = x / h;
    return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q));
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir) {
    ExperimentConfig c;
    Block root(j);
    c.seed = root.get<std::uint64_t>("seed", c.seed);
    c.threads = root.get<std::size_t>("threads", c.threads);
    require(c.threads >= 1, "threads must be >= 1");
    for (const char* block : {"basis", "kernel", "nonlinearity", "forcing", "initial", "solver", "grid", "energy",
                              "decay", "attractor", "kv", "gronwall"}) {
        root.mark(block);
    }

    {
        Block b(j, "basis", "");
        c.basis.length = b.get("length", c.basis.length);
        c.basis.modes = b.get("modes", c.basis.modes);
        c.basis.points = b.get("points", c.basis.points);
        b.finish();
        require(c.basis.length > 0.0, "basis.length must be positive");
        require(c.basis.modes >= 1, "basis.modes must be >= 1");
        if (c.basis.points == 0) c.basis.points = 2 * c.basis.modes;
        require(c.basis.points >= 2 * c.basis.modes, "basis.points must be >= 2 * basis.modes");
    }
    if (j.contains("kernel")) {
        require(j.at("kernel").is_object(), "'kernel' must be an object");
        try {
            c.kernel = make_kernel(j.at("kernel"))->parameters();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: kernel: ") + e.what());
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: kernel parameters have the wrong type");
        }
        const auto resolved = c.kernel;
        for (auto it = j.at("kernel").begin(); it != j.at("kernel").end(); ++it) {
            require(resolved.contains(it.key()), "unknown key 'kernel." + it.key() + "'");
        }
    }
    const SpectralBasis basis = make_basis(c);
    {
        Block b(j, "nonlinearity", "");
        c.nonlinearity.cubic = b.get("cubic", c.nonlinearity.cubic);
        c.nonlinearity.linear = b.get("linear", c.nonlinearity.linear);
        require(c.nonlinearity.cubic >= 0.0, "nonlinearity.cubic must be >= 0");
        require(c.nonlinearity.linear > -basis.lambda1(),
                "nonlinearity.linear must exceed -lambda_1 = " + std::to_string(-basis.lambda1()));
        const Nonlinearity f = Nonlinearity::polynomial(c.nonlinearity.cubic, c.nonlinearity.linear, basis);
        c.nonlinearity.theta = b.get("theta", f.theta);
        c.nonlinearity.c_f = b.get("c_f", f.c_f);
        b.finish();
        require(c.nonlinearity.theta > 0.0 && c.nonlinearity.theta <= 1.0, "nonlinearity.theta must lie in (0, 1]");
        require(c.nonlinearity.c_f >= 0.0, "nonlinearity.c_f must be >= 0");
        if (c.nonlinearity.theta != f.theta || c.nonlinearity.c_f != f.c_f) {
            const Nonlinearity given = make_nonlinearity(c, basis);
            std::vector<ModalField> samples;
            std::mt19937_64 rng(c.seed);
            for (double R : {1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}) {
                for (int i = 0; i < 8; ++i) samples.push_back(scale_to_energy(random_shape(basis, rng), R, basis).u);
            }
            const NonlinearityCheck chk = check_nonlinearity(given, basis, samples);
            require(chk.bounds_hold, "nonlinearity.theta / nonlinearity.c_f violate the lower bounds on sampled fields");
        }
    }
    {
        Block b(j, "forcing", "");
        c.forcing.type = b.get("type", c.forcing.type);
        c.forcing.coefficients = b.get("coefficients", c.forcing.coefficients);
        b.finish();
        require(c.forcing.type == "zero" || c.forcing.type == "modal", "forcing.type must be 'zero' or 'modal'");
        if (c.forcing.type == "zero") {
            require(c.forcing.coefficients.empty(), "forcing.coefficients given with type 'zero'");
        } else {
            require(c.forcing.coefficients.size() <= c.basis.modes,
                    "forcing.coefficients has more entries than basis.modes");
            c.forcing.coefficients.resize(c.basis.modes, 0.0);
        }
    }
    {
        Block b(j, "initial", "");
        c.initial.type = b.get("type", c.initial.type);
        c.initial.R = b.get("R", c.initial.R);
        c.initial.u = b.get("u", c.initial.u);
        c.initial.v = b.get("v", c.initial.v);
        b.finish();
        require(c.initial.type == "random" || c.initial.type == "zero" || c.initial.type == "modal",
                "initial.type must be 'random', 'zero' or 'modal'");
        require(c.initial.R >= 0.0, "initial.R must be >= 0");
        if (c.initial.type == "modal") {
            require(c.initial.u.size() <= c.basis.modes && c.initial.v.size() <= c.basis.modes,
                    "initial.u / initial.v have more entries than basis.modes");
            c.initial.u.resize(c.basis.modes, 0.0);
            c.initial.v.resize(c.basis.modes, 0.0);
        } else {
            require(c.initial.u.empty() && c.initial.v.empty(), "initial.u / initial.v need type 'modal'");
        }
    }
    {
        Block b(j, "solver", "");
        c.run.dt = b.get("dt", c.run.dt);
        c.run.tau = b.get("tau", c.run.tau);
        c.run.T = b.get("T", c.run.T);
        c.run.output_stride = b.get("output_stride", c.run.output_stride);
        c.run.eta_mode = b.get("eta_mode", c.run.eta_mode);
        c.run.cross_check_every = b.get("cross_check_every", c.run.cross_check_every);
        c.run.transport_rebase_every = b.get("transport_rebase_every", c.run.transport_rebase_every);
        b.finish();
        require(c.run.dt > 0.0 && std::isfinite(c.run.dt), "solver.dt must be positive");
        require(c.run.T > c.run.tau, "solver.T must exceed solver.tau");
        require(is_multiple(c.run.T - c.run.tau, c.run.dt), "solver.T - solver.tau must be a multiple of solver.dt");
        require(c.run.output_stride >= 1, "solver.output_stride must be >= 1");
        require(c.run.transport_rebase_every >= 1, "solver.transport_rebase_every must be >= 1");
        require(c.run.eta_mode == "transport" || c.run.eta_mode == "representation",
                "solver.eta_mode must be 'transport' or 'representation'");
    }
    {
        Block b(j, "grid", "");
        c.grid.J = b.get("J", c.grid.J);
        c.grid.first_factor = b.get("first_factor", c.grid.first_factor);
        c.grid.tail_rel = b.get("tail_rel", c.grid.tail_rel);
        b.finish();
        require(c.grid.J >= 8, "grid.J must be >= 8");
        require(c.grid.first_factor > 0.0 && c.grid.first_factor < 1.0, "grid.first_factor must lie in (0, 1)");
        require(c.grid.tail_rel > 0.0 && c.grid.tail_rel < 1.0, "grid.tail_rel must lie in (0, 1)");
    }
    {
        Block b(j, "energy", "");
        c.energy.window = b.get("window", c.energy.window);
        c.energy.refine = b.get("refine", c.energy.refine);
        b.finish();
        require(c.energy.window > 0.0, "energy.window must be positive");
    }
    {
        Block b(j, "decay", "");
        c.decay.radii = b.get("radii", c.decay.radii);
        c.decay.T = b.get("T", c.decay.T);
        c.decay.lo_rel = b.get("lo_rel", c.decay.lo_rel);
        c.decay.hi_rel = b.get("hi_rel", c.decay.hi_rel);
        c.decay.omega_spread = b.get("omega_spread", c.decay.omega_spread);
        c.decay.R0_spread = b.get("R0_spread", c.decay.R0_spread);
        b.finish();
        require(!c.decay.radii.empty(), "decay.radii must be nonempty");
        for (double r : c.decay.radii) require(r > 0.0, "decay.radii must be positive");
        require(c.decay.T > 0.0 && is_multiple(c.decay.T, c.run.dt), "decay.T must be a positive multiple of solver.dt");
        require(c.decay.lo_rel > 0.0 && c.decay.lo_rel < c.decay.hi_rel && c.decay.hi_rel <= 1.0,
                "decay needs 0 < lo_rel < hi_rel <= 1");
    }
    {
        Block b(j, "attractor", "");
        c.attractor.members = b.get("members", c.attractor.members);
        c.attractor.R = b.get("R", c.attractor.R);
        c.attractor.t = b.get("t", c.attractor.t);
        c.attractor.offsets = b.get("offsets", c.attractor.offsets);
        c.attractor.invariance_offset = b.get("invariance_offset", c.attractor.invariance_offset);
        c.attractor.probe_stride = b.get("probe_stride", c.attractor.probe_stride);
        b.finish();
        require(c.attractor.members >= 1, "attractor.members must be >= 1");
        require(c.attractor.offsets.size() >= 2, "attractor.offsets needs at least two entries");
        for (std::size_t n = 0; n < c.attractor.offsets.size(); ++n) {
            require(c.attractor.offsets[n] > 0.0 && is_multiple(c.attractor.offsets[n], c.run.dt),
                    "attractor.offsets must be positive multiples of solver.dt");
            require(n == 0 || c.attractor.offsets[n] > c.attractor.offsets[n - 1],
                    "attractor.offsets must increase (tau list strictly decreasing)");
        }
        require(c.attractor.invariance_offset > 0.0 && is_multiple(c.attractor.invariance_offset, c.run.dt),
                "attractor.invariance_offset must be a positive multiple of solver.dt");
    }
    {
        Block b(j, "kv", "");
        c.kv.windows = b.get("windows", c.kv.windows);
        c.kv.pullback_length = b.get("pullback_length", c.kv.pullback_length);
        c.kv.burn_in = b.get("burn_in", c.kv.burn_in);
        b.finish();
        require(c.kv.windows.size() >= 3, "kv.windows needs at least three entries");
        for (std::size_t n = 1; n < c.kv.windows.size(); ++n) {
            require(c.kv.windows[n] > c.kv.windows[n - 1], "kv.windows must increase");
        }
        require(c.kv.pullback_length > 0.0 && is_multiple(c.kv.pullback_length, c.run.dt),
                "kv.pullback_length must be a positive multiple of solver.dt");
        require(c.kv.burn_in > 0.0 && is_multiple(c.kv.burn_in, c.run.dt),
                "kv.burn_in must be a positive multiple of solver.dt");
    }
    {
        Block b(j, "gronwall", "");
        c.gronwall.instance_csv = b.get("instance_csv", c.gronwall.instance_csv);
        c.gronwall.instance_json = b.get("instance_json", c.gronwall.instance_json);
        b.finish();
        auto resolve = [&](std::string& p) {
            if (!p.empty() && !base_dir.empty() && std::filesystem::path(p).is_relative()) {
                p = (std::filesystem::path(base_dir) / p).lexically_normal().string();
            }
        };
        resolve(c.gronwall.instance_csv);
        resolve(c.gronwall.instance_json);
        require(c.gronwall.instance_csv.empty() == c.gronwall.instance_json.empty(),
                "gronwall.instance_csv and gronwall.instance_json go together");
    }
    root.finish();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return parse_config(j, std::filesystem::path(path).parent_path().string());
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["basis"] = {{"length", c.basis.length}, {"modes", c.basis.modes}, {"points", c.basis.points}};
    j["kernel"] = c.kernel;
    j["nonlinearity"] = {{"cubic", c.nonlinearity.cubic},
                         {"linear", c.nonlinearity.linear},
                         {"theta", c.nonlinearity.theta},
                         {"c_f", c.nonlinearity.c_f}};
    j["forcing"] = {{"type", c.forcing.type}};
    if (c.forcing.type == "modal") j["forcing"]["coefficients"] = c.forcing.coefficients;
    j["initial"] = {{"type", c.initial.type}, {"R", c.initial.R}};
    if (c.initial.type == "modal") {
        j["initial"]["u"] = c.initial.u;
        j["initial"]["v"] = c.initial.v;
    }
    j["solver"] = {{"dt", c.run.dt},
                   {"tau", c.run.tau},
                   {"T", c.run.T},
                   {"output_stride", c.run.output_stride},
                   {"eta_mode", c.run.eta_mode},
                   {"cross_check_every", c.run.cross_check_every},
                   {"transport_rebase_every", c.run.transport_rebase_every}};
    j["grid"] = {{"J", c.grid.J}, {"first_factor", c.grid.first_factor}, {"tail_rel", c.grid.tail_rel}};
    j["energy"] = {{"window", c.energy.window}, {"refine", c.energy.refine}};
    j["decay"] = {{"radii", c.decay.radii},   {"T", c.decay.T},
                  {"lo_rel", c.decay.lo_rel}, {"hi_rel", c.decay.hi_rel},
                  {"omega_spread", c.decay.omega_spread}, {"R0_spread", c.decay.R0_spread}};
    j["attractor"] = {{"members", c.attractor.members},
                      {"R", c.attractor.R},
                      {"t", c.attractor.t},
                      {"offsets", c.attractor.offsets},
                      {"invariance_offset", c.attractor.invariance_offset},
                      {"probe_stride", c.attractor.probe_stride}};
    j["kv"] = {{"windows", c.kv.windows}, {"pullback_length", c.kv.pullback_length}, {"burn_in", c.kv.burn_in}};
    j["gronwall"] = {{"instance_csv", c.gronwall.instance_csv}, {"instance_json", c.gronwall.instance_json}};
    return j;
}

SpectralBasis make_basis(const ExperimentConfig& c) {
    return SpectralBasis(c.basis.length, c.basis.modes, c.basis.points);
}

Nonlinearity make_nonlinearity(const ExperimentConfig& c, const SpectralBasis&) {
    return Nonlinearity{c.nonlinearity.cubic, c.nonlinearity.linear, c.nonlinearity.theta, c.nonlinearity.c_f};
}

ModalField make_forcing(const ExperimentConfig& c, const SpectralBasis& basis) {
    if (c.forcing.type == "zero") return basis.zero();
    return ModalField(c.forcing.coefficients);
}

SolverConfig make_solver_config(const ExperimentConfig& c, const SpectralBasis& basis) {
    SolverConfig s;
    s.dt = c.run.dt;
    s.eta_mode = eta_mode_from_string(c.run.eta_mode);
    s.cross_check_every = c.run.cross_check_every;
    s.transport_rebase_every = c.run.transport_rebase_every;
    s.f = make_nonlinearity(c, basis);
    s.g = make_forcing(c, basis);
    s.output_stride = c.run.output_stride;
    return s;
}

Model make_model(const ExperimentConfig& c, double t_lo, double t_hi, double dt, std::size_t J) {
    const SpectralBasis basis = make_basis(c);
    const KernelPtr kernel = make_kernel(c.kernel);
    SolverConfig s = make_solver_config(c, basis);
    s.dt = dt;
    const SGrid grid = SGrid::for_kernel(*kernel, t_lo, t_hi, J, c.grid.first_factor, c.grid.tail_rel);
    Model m(basis, kernel, grid, s);
    m.validate(t_lo, t_hi);
    return m;
}

Model make_model(const ExperimentConfig& c, double t_lo, double t_hi) {
    return make_model(c, t_lo, t_hi, c.run.dt, c.grid.J);
}

InitialDatum make_initial(const ExperimentConfig& c, const SpectralBasis& basis, double R) {
    if (c.initial.type == "zero") return {basis.zero(), basis.zero()};
    if (c.initial.type == "modal") return {ModalField(c.initial.u), ModalField(c.initial.v)};
    std::mt19937_64 rng(c.seed);
    return scale_to_energy(random_shape(basis, rng), R, basis);
}

}  // namespace viscomem
