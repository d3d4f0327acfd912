#include "mvr/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <atomic>
#include <future>
#include <vector>

#include "mvr/csv.hpp"
#include "mvr/estimators.hpp"
#include "mvr/hdg.hpp"
#include "mvr/mc.hpp"
#include "mvr/model.hpp"
#include "mvr/rb.hpp"
#include "mvr/rng.hpp"

namespace mvr::harness {

namespace {

namespace est = mvr::estimators;

struct Workspace {
    ParameterDomain domain;
    hdg::AffineSystem<double> sys;
};

Workspace make_workspace(const ExperimentConfig& cfg) {
    if (cfg.model.mode != "real")
        throw ConfigError("model.mode = complex is not supported by the harness commands");
    Workspace w;
    w.domain = ParameterDomain::uniform_box(cfg.model.q, cfg.model.y_min, cfg.model.y_max);
    w.sys = hdg::assemble_affine<double>(
        hdg::Mesh1D::uniform(cfg.discretization.elements),
        hdg::DiscreteSpaces{cfg.discretization.p},
        RandomFieldExpansion::benchmark_piecewise(cfg.model.q), w.domain, cfg.model.rho,
        hdg::BoundaryCondition<double>::dirichlet(cfg.model.dirichlet),
        hdg::BoundaryCondition<double>::robin(cfg.model.robin_nu, cfg.model.robin_g),
        [s = cfg.model.source](double) { return s; }, cfg.discretization.tau);
    return w;
}

// The closed-form moments hold only for the exact benchmark setup.
bool has_oracle(const ExperimentConfig& cfg) {
    return cfg.model.field == "benchmark" && cfg.model.rho == 0.0 &&
           cfg.model.dirichlet == 0.0 && cfg.model.robin_nu == 0.0 &&
           cfg.model.robin_g == 0.0 && cfg.model.source == 1.0;
}

std::string resolve_out_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
    const std::string dir = opts.out_dir.value_or(cfg.output.dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string model_path(const std::string& dir) { return dir + "/rb_model.txt"; }

std::uint64_t sampling_seed(const ExperimentConfig& cfg, const RunOptions& opts) {
    return opts.seed.value_or(cfg.mc.seed);
}

rb::RBModel<double> load_rb_model(const std::string& dir) {
    const auto path = model_path(dir);
    if (!std::filesystem::exists(path))
        throw ConfigError("RB model file not found: " + path + " (run build-rb first)");
    return rb::load_model<double>(path);
}

est::OutputChannels make_channels(const ExperimentConfig& cfg, const Workspace& w,
                                  const rb::RBModel<double>* model) {
    est::OutputChannels ch;
    ch.domain = w.domain;
    ch.n_max = model ? model->N : cfg.rb.n_max;
    if (cfg.model.full_model == "analytic") {
        if (!has_oracle(cfg))
            throw ConfigError("model.full_model = analytic requires the benchmark setup");
        ch.full = [](const ParameterVector& y) { return analytic_output_1d(y); };
    } else {
        ch.full = [&w](const ParameterVector& y) {
            return hdg::evaluate_output(w.sys, hdg::solve_full(w.sys, y));
        };
    }
    if (model)
        ch.reduced = [model](int n, const ParameterVector& y) {
            return rb::online_output(*model, n, y);
        };
    return ch;
}

est::Timings resolve_timings(const ExperimentConfig& cfg, const est::OutputChannels& ch) {
    if (cfg.mvr.t_h_override) {
        if (int(cfg.mvr.t_n_override.size()) != ch.n_max)
            throw ConfigError("mvr.t_n override needs one entry per RB dimension");
        est::Timings t;
        t.t_h = *cfg.mvr.t_h_override;
        t.t_N = cfg.mvr.t_n_override;
        return t;
    }
    return est::measure_timings(ch);
}

// column-wise arithmetic means of a row block
std::vector<double> mean_row(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out(rows.front().size(), 0.0);
    for (std::size_t c = 0; c < out.size(); ++c) {
        mc::CompensatedSum sum;
        for (const auto& row : rows) sum.add(row[c]);
        out[c] = sum.value() / double(rows.size());
    }
    return out;
}

template <typename Task>
std::vector<std::vector<double>> run_replications(int count, int threads, Task&& task) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(count));
    if (threads <= 1) {
        for (int h = 0; h < count; ++h) rows[std::size_t(h)] = task(h);
        return rows;
    }
    std::atomic<int> next{0};
    std::vector<std::future<void>> workers;
    for (int t = 0; t < threads; ++t)
        workers.push_back(std::async(std::launch::async, [&] {
            for (int h = next.fetch_add(1); h < count; h = next.fetch_add(1))
                rows[std::size_t(h)] = task(h);
        }));
    for (auto& f : workers) f.get();
    return rows;
}

}  // namespace

void cmd_build_rb(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto dir = resolve_out_dir(cfg, opts);
    const auto w = make_workspace(cfg);

    SampleStream train_stream(cfg.rb.seed);
    const auto training = draw_samples(train_stream, w.domain, std::size_t(cfg.rb.training));
    rb::GreedyOptions gopt;
    gopt.N_max = cfg.rb.n_max;
    gopt.compliant = cfg.rb.compliant;
    const auto model = rb::greedy_build(w.sys, training, gopt).model;
    rb::save_model(model, model_path(dir));

    auto test_stream = SampleStream::derive(cfg.rb.seed, 1, 0);
    const auto test_set = draw_samples(test_stream, w.domain, 200);
    std::vector<double> s_h;
    for (const auto& y : test_set)
        s_h.push_back(hdg::evaluate_output(w.sys, hdg::solve_full(w.sys, y)));

    csv::Table table;
    table.name = "greedy_table";
    table.columns = {"N", "max_delta", "avg_delta", "max_err", "avg_err"};
    for (int n = 1; n <= model.N; ++n) {
        double max_delta = 0.0, max_err = 0.0;
        mc::CompensatedSum sum_delta, sum_err;
        for (std::size_t m = 0; m < test_set.size(); ++m) {
            const auto bound = rb::output_bound(model, n, test_set[m]);
            const double delta = bound ? bound->delta_s
                                       : rb::residual_dual_norm(model, n, test_set[m],
                                                                rb::ResidualKind::Primal);
            const double err = std::abs(s_h[m] - rb::online_output(model, n, test_set[m]));
            max_delta = std::max(max_delta, delta);
            max_err = std::max(max_err, err);
            sum_delta.add(delta);
            sum_err.add(err);
        }
        table.rows.push_back({double(n), max_delta, sum_delta.value() / double(test_set.size()),
                              max_err, sum_err.value() / double(test_set.size())});
    }
    csv::write_file(dir + "/greedy_table.csv", table);
}

void cmd_run(const ExperimentConfig& cfg, const std::string& method, const RunOptions& opts) {
    if (method != "mc-hdg" && method != "mc-rb" && method != "mvr")
        throw ConfigError("unknown method: " + method + " (expected mc-hdg, mc-rb, or mvr)");
    const auto dir = resolve_out_dir(cfg, opts);
    const auto w = make_workspace(cfg);

    std::optional<rb::RBModel<double>> model;
    if (method != "mc-hdg") model = load_rb_model(dir);
    const auto channels = make_channels(cfg, w, model ? &*model : nullptr);
    const auto oracle =
        has_oracle(cfg) ? std::optional<BenchmarkMoments>(analytic_moments_1d(w.domain))
                        : std::nullopt;
    const std::uint64_t seed = sampling_seed(cfg, opts);
    const double a = cfg.mc.a;

    std::vector<int> dims = cfg.mvr.dims;
    std::vector<double> fractions = cfg.mvr.m_fractions;
    if (method == "mvr") {
        if (dims.empty()) throw ConfigError("run --method mvr requires mvr.dims");
        est::LevelSpec{dims}.validate(model->N);
        if (fractions.empty()) {
            fractions.assign(dims.size() + 1, 1.0);
            fractions.front() = 0.1;  // default 1-MVR split: one full solve per ten samples
        }
    }

    csv::Table table, summary;
    table.name = "run_" + method;
    summary.name = "run_" + method + "_summary";
    table.columns = {"M",         "replication", "estimate",   "half_width",
                     "abs_error", "bound_total", "full_solves", "elapsed_seconds"};
    summary.columns = table.columns;

    for (std::size_t mi = 0; mi < cfg.mc.schedule.size(); ++mi) {
        const std::size_t m = cfg.mc.schedule[mi];
        const auto task = [&, m, mi](int h) {
            const auto start = std::chrono::steady_clock::now();
            double estimate = 0.0, half_width = 0.0, bound_total = 0.0, full_solves = 0.0;
            if (method == "mvr") {
                std::vector<SampleStream> streams;
                std::vector<std::size_t> counts;
                for (std::size_t l = 0; l < dims.size() + 1; ++l) {
                    streams.push_back(SampleStream::derive(
                        seed, (std::uint64_t(mi) << 32) | std::uint64_t(h), l));
                    counts.push_back(std::max<std::size_t>(
                        2, std::size_t(std::llround(fractions[l] * double(m)))));
                }
                const auto e = est::multilevel_estimate(channels, est::LevelSpec{dims},
                                                        streams, counts, a);
                estimate = e.E;
                half_width = e.delta_E;
                bound_total = e.delta_E;
                full_solves = double(counts.front());
            } else {
                auto stream = SampleStream::derive(
                    seed, (std::uint64_t(mi) << 32) | std::uint64_t(h), 0);
                std::vector<double> samples;
                samples.reserve(m);
                std::vector<double> deltas;
                for (std::size_t i = 0; i < m; ++i) {
                    const auto y = draw_one(stream, w.domain);
                    if (method == "mc-hdg") {
                        samples.push_back(channels.full(y));
                    } else {
                        const auto bound = rb::output_bound(*model, cfg.rb.n_eval, y);
                        if (bound) {
                            samples.push_back(bound->s_N);
                            deltas.push_back(bound->delta_s);
                        } else {
                            samples.push_back(channels.reduced(cfg.rb.n_eval, y));
                        }
                    }
                }
                const auto e = mc::estimate_mean(samples, a);
                estimate = e.value;
                half_width = e.half_width;
                full_solves = method == "mc-hdg" ? double(m) : 0.0;
                if (method == "mc-rb" && deltas.size() == samples.size()) {
                    const double delta_e = mc::mc_rb_expectation_bound(deltas);
                    const double delta_v = mc::mc_rb_variance_bound(samples, deltas, delta_e);
                    bound_total = mc::mc_rb_total_bound(*mc::mc_mean_var(samples).variance,
                                                        delta_v, samples.size(), a, delta_e);
                } else {
                    bound_total = half_width;
                }
            }
            const double abs_error =
                oracle ? std::abs(estimate - oracle->mean) : std::nan("");
            const double elapsed =
                opts.deterministic
                    ? 0.0
                    : std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
            return std::vector<double>{double(m),   double(h),   estimate,    half_width,
                                       abs_error,   bound_total, full_solves, elapsed};
        };
        const auto rows = run_replications(cfg.mc.replications, opts.threads, task);
        for (const auto& row : rows) table.rows.push_back(row);
        summary.rows.push_back(mean_row(rows));
    }
    csv::write_file(dir + "/run_" + method + ".csv", table);
    csv::write_file(dir + "/run_" + method + "_summary.csv", summary);
}

void cmd_select(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto dir = resolve_out_dir(cfg, opts);
    const auto w = make_workspace(cfg);
    const auto model = load_rb_model(dir);
    const auto channels = make_channels(cfg, w, &model);
    if (cfg.mvr.l_max >= model.N)
        throw ConfigError("mvr.levels must stay below the stored RB dimension");

    const auto stats = est::build_test_statistics(
        channels, SampleStream::derive(sampling_seed(cfg, opts), 2, 0), cfg.mvr.test_set);
    const auto timings = resolve_timings(cfg, channels);
    const auto table = est::compare_level_counts(cfg.mvr.l_min, cfg.mvr.l_max, stats, timings);

    const double v_full = *mc::mc_mean_var(stats.s_h).variance;
    csv::Table out;
    out.name = "select_table";
    out.columns = {"L", "cost", "cost_ratio", "predicted_speedup"};
    for (int i = 1; i <= cfg.mvr.l_max; ++i) out.columns.push_back("N" + std::to_string(i));
    for (int i = 0; i <= cfg.mvr.l_max; ++i) out.columns.push_back("w" + std::to_string(i));
    for (const auto& row : table) {
        std::vector<double> r = {double(row.L), row.cost, row.cost_ratio,
                                 timings.t_h * v_full / row.cost};
        for (int i = 0; i < cfg.mvr.l_max; ++i)
            r.push_back(i < int(row.N.size()) ? double(row.N[std::size_t(i)]) : 0.0);
        for (int i = 0; i <= cfg.mvr.l_max; ++i)
            r.push_back(i < int(row.w.size()) ? row.w[std::size_t(i)] : 0.0);
        out.rows.push_back(r);
    }
    csv::write_file(dir + "/select_table.csv", out);
}

void cmd_oracle(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (!has_oracle(cfg))
        throw ConfigError("oracle requires the benchmark setup "
                          "(field=benchmark, rho=0, homogeneous BCs, unit source)");
    const auto dir = resolve_out_dir(cfg, opts);
    const auto domain = ParameterDomain::uniform_box(cfg.model.q, cfg.model.y_min,
                                                     cfg.model.y_max);
    const auto moments = analytic_moments_1d(domain);

    csv::Table mtab;
    mtab.name = "oracle_moments";
    mtab.columns = {"mean", "variance"};
    mtab.rows.push_back({moments.mean, moments.variance});
    csv::write_file(dir + "/oracle_moments.csv", mtab);

    csv::Table ptab;
    ptab.name = "oracle_probes";
    ptab.columns = {"probe"};
    for (int q = 1; q <= cfg.model.q; ++q) ptab.columns.push_back("y" + std::to_string(q));
    ptab.columns.push_back("s");
    std::vector<ParameterVector> probes;
    probes.push_back(ParameterVector::Constant(cfg.model.q, cfg.model.y_max));
    if (cfg.model.y_min > 0.0)
        probes.push_back(ParameterVector::Constant(cfg.model.q, cfg.model.y_min));
    auto stream = SampleStream::derive(sampling_seed(cfg, opts), 3, 0);
    for (int k = 0; k < 3; ++k) probes.push_back(draw_one(stream, domain));
    for (std::size_t k = 0; k < probes.size(); ++k) {
        std::vector<double> row = {double(k)};
        for (int q = 0; q < cfg.model.q; ++q) row.push_back(probes[k][q]);
        row.push_back(analytic_output_1d(probes[k]));
        ptab.rows.push_back(row);
    }
    csv::write_file(dir + "/oracle_probes.csv", ptab);
}

}  // namespace mvr::harness
