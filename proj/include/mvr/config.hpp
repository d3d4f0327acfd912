#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvr::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelBlock {
    int q = 10;
    double y_min = 0.1;
    double y_max = 1.0;
    std::string field = "benchmark";  // piecewise-constant indicator expansion
    double rho = 0.0;
    double source = 1.0;
    double dirichlet = 0.0;
    double robin_nu = 0.0;
    double robin_g = 0.0;
    std::string mode = "real";
    std::string full_model = "hdg";  // hdg | analytic
};

struct DiscretizationBlock {
    int elements = 10;
    int p = 2;
    double tau = 1.0;
};

struct RBBlock {
    int n_max = 10;
    int training = 400;
    std::uint64_t seed = 1;
    bool compliant = true;
    int n_eval = 9;  // RB dimension used by run --method mc-rb
};

struct MCBlock {
    double a = 1.96;
    double eps_tol = 1e-3;
    std::uint64_t seed = 1;
    int replications = 1;
    std::vector<std::size_t> schedule = {10000};
};

struct MVRBlock {
    int l_min = 1;
    int l_max = 3;
    std::size_t test_set = 400;
    std::vector<int> dims;           // explicit level dimensions for run --method mvr
    std::vector<double> m_fractions; // per-level M_l = ceil(fraction * M)
    std::size_t batch_min = 30;
    std::optional<double> t_h_override;
    std::vector<double> t_n_override;
};

struct OutputBlock {
    std::string dir = ".";
    std::string formats = "csv";
};

struct ExperimentConfig {
    ModelBlock model;
    DiscretizationBlock discretization;
    RBBlock rb;
    MCBlock mc;
    MVRBlock mvr;
    OutputBlock output;

    void validate() const {
        if (model.q < 1) throw ConfigError("model.q must be >= 1");
        if (model.y_min > model.y_max) throw ConfigError("model.y_min must be <= model.y_max");
        if (model.field != "benchmark")
            throw ConfigError("model.field: only 'benchmark' is supported");
        if (model.mode != "real" && model.mode != "complex")
            throw ConfigError("model.mode must be real or complex");
        if (model.full_model != "hdg" && model.full_model != "analytic")
            throw ConfigError("model.full_model must be hdg or analytic");
        if (discretization.elements < 1) throw ConfigError("discretization.elements must be >= 1");
        if (discretization.p < 1) throw ConfigError("discretization.p must be >= 1");
        if (!(discretization.tau > 0)) throw ConfigError("discretization.tau must be > 0");
        if (rb.n_max < 1) throw ConfigError("rb.n_max must be >= 1");
        if (rb.training < 1) throw ConfigError("rb.training must be >= 1");
        if (rb.n_eval < 1 || rb.n_eval > rb.n_max)
            throw ConfigError("rb.n_eval must lie in [1, rb.n_max]");
        if (!(mc.a > 0)) throw ConfigError("mc.a must be > 0");
        if (!(mc.eps_tol > 0)) throw ConfigError("mc.eps_tol must be > 0");
        if (mc.replications < 1) throw ConfigError("mc.replications must be >= 1");
        if (mc.schedule.empty()) throw ConfigError("mc.schedule must not be empty");
        for (std::size_t m : mc.schedule)
            if (m < 2) throw ConfigError("mc.schedule entries must be >= 2");
        if (mvr.l_min < 1 || mvr.l_max < mvr.l_min)
            throw ConfigError("mvr.levels range must satisfy 1 <= l_min <= l_max");
        if (mvr.l_max >= rb.n_max) throw ConfigError("mvr.levels must stay below rb.n_max");
        if (mvr.test_set < 2) throw ConfigError("mvr.test_set must be >= 2");
        if (!mvr.dims.empty()) {
            for (std::size_t i = 0; i < mvr.dims.size(); ++i) {
                if (mvr.dims[i] < 1 || mvr.dims[i] > rb.n_max)
                    throw ConfigError("mvr.dims entries must lie in [1, rb.n_max]");
                if (i > 0 && mvr.dims[i] >= mvr.dims[i - 1])
                    throw ConfigError("mvr.dims must be strictly decreasing");
            }
            if (!mvr.m_fractions.empty() && mvr.m_fractions.size() != mvr.dims.size() + 1)
                throw ConfigError("mvr.m_fractions needs one entry per level (dims + 1)");
            for (double f : mvr.m_fractions)
                if (!(f > 0)) throw ConfigError("mvr.m_fractions must be > 0");
        }
        if (output.formats != "csv") throw ConfigError("output.formats: only csv is supported");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct KeyContext {
    const std::string& file;
    int line;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(file + ":" + std::to_string(line) + ": " + msg);
    }

    double number(const std::string& v) const {
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size()) fail("trailing characters in number: " + v);
            return d;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail("expected a number, got: " + v);
        }
    }

    int integer(const std::string& v) const {
        const double d = number(v);
        if (d != double(int(d))) fail("expected an integer, got: " + v);
        return int(d);
    }

    std::uint64_t unsigned64(const std::string& v) const {
        try {
            std::size_t used = 0;
            const std::uint64_t u = std::stoull(v, &used);
            if (used != v.size()) fail("trailing characters in integer: " + v);
            return u;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail("expected an unsigned integer, got: " + v);
        }
    }

    bool boolean(const std::string& v) const {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        fail("expected true/false, got: " + v);
    }

    template <typename T, typename F>
    std::vector<T> list(const std::string& v, F&& parse_one) const {
        std::vector<T> out;
        std::istringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_one(trim(item)));
        if (out.empty()) fail("expected a comma-separated list");
        return out;
    }
};

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& is, const std::string& filename) {
    ExperimentConfig cfg;
    std::string block, line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        detail::KeyContext ctx{filename, line_no};
        const auto text = detail::trim(line.substr(0, line.find('#')));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') ctx.fail("malformed block header: " + text);
            block = text.substr(1, text.size() - 2);
            if (block != "model" && block != "discretization" && block != "rb" &&
                block != "mc" && block != "mvr" && block != "output")
                ctx.fail("unknown block: " + block);
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) ctx.fail("expected key = value, got: " + text);
        const auto key = detail::trim(text.substr(0, eq));
        const auto value = detail::trim(text.substr(eq + 1));
        if (block.empty()) ctx.fail("key outside of any block: " + key);

        const auto as_int = [&](const std::string& v) { return ctx.integer(v); };
        const auto as_double = [&](const std::string& v) { return ctx.number(v); };
        if (block == "model") {
            if (key == "q") cfg.model.q = ctx.integer(value);
            else if (key == "y_min") cfg.model.y_min = ctx.number(value);
            else if (key == "y_max") cfg.model.y_max = ctx.number(value);
            else if (key == "field") cfg.model.field = value;
            else if (key == "rho") cfg.model.rho = ctx.number(value);
            else if (key == "source") cfg.model.source = ctx.number(value);
            else if (key == "dirichlet") cfg.model.dirichlet = ctx.number(value);
            else if (key == "robin_nu") cfg.model.robin_nu = ctx.number(value);
            else if (key == "robin_g") cfg.model.robin_g = ctx.number(value);
            else if (key == "mode") cfg.model.mode = value;
            else if (key == "full_model") cfg.model.full_model = value;
            else ctx.fail("unknown key model." + key);
        } else if (block == "discretization") {
            if (key == "elements") cfg.discretization.elements = ctx.integer(value);
            else if (key == "p") cfg.discretization.p = ctx.integer(value);
            else if (key == "tau") cfg.discretization.tau = ctx.number(value);
            else ctx.fail("unknown key discretization." + key);
        } else if (block == "rb") {
            if (key == "n_max") cfg.rb.n_max = ctx.integer(value);
            else if (key == "training") cfg.rb.training = ctx.integer(value);
            else if (key == "seed") cfg.rb.seed = ctx.unsigned64(value);
            else if (key == "compliant") cfg.rb.compliant = ctx.boolean(value);
            else if (key == "n_eval") cfg.rb.n_eval = ctx.integer(value);
            else ctx.fail("unknown key rb." + key);
        } else if (block == "mc") {
            if (key == "a") cfg.mc.a = ctx.number(value);
            else if (key == "eps_tol") cfg.mc.eps_tol = ctx.number(value);
            else if (key == "seed") cfg.mc.seed = ctx.unsigned64(value);
            else if (key == "replications") cfg.mc.replications = ctx.integer(value);
            else if (key == "schedule") {
                cfg.mc.schedule.clear();
                for (int m : ctx.list<int>(value, as_int)) {
                    if (m < 0) ctx.fail("mc.schedule entries must be positive");
                    cfg.mc.schedule.push_back(std::size_t(m));
                }
            } else ctx.fail("unknown key mc." + key);
        } else if (block == "mvr") {
            if (key == "levels") {
                const auto colon = value.find(':');
                if (colon == std::string::npos) {
                    cfg.mvr.l_min = cfg.mvr.l_max = ctx.integer(value);
                } else {
                    cfg.mvr.l_min = ctx.integer(detail::trim(value.substr(0, colon)));
                    cfg.mvr.l_max = ctx.integer(detail::trim(value.substr(colon + 1)));
                }
            } else if (key == "test_set") cfg.mvr.test_set = std::size_t(ctx.integer(value));
            else if (key == "dims") cfg.mvr.dims = ctx.list<int>(value, as_int);
            else if (key == "m_fractions")
                cfg.mvr.m_fractions = ctx.list<double>(value, as_double);
            else if (key == "batch_min") cfg.mvr.batch_min = std::size_t(ctx.integer(value));
            else if (key == "t_h") cfg.mvr.t_h_override = ctx.number(value);
            else if (key == "t_n") cfg.mvr.t_n_override = ctx.list<double>(value, as_double);
            else ctx.fail("unknown key mvr." + key);
        } else if (block == "output") {
            if (key == "dir") cfg.output.dir = value;
            else if (key == "formats") cfg.output.formats = value;
            else ctx.fail("unknown key output." + key);
        }
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    return parse_config(is, path);
}

}  // namespace mvr::harness
