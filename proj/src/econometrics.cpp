#include "phishtriage/econometrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include "phishtriage/csv.hpp"
#include "phishtriage/parallel.hpp"

namespace phishtriage::econ {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const std::array<std::string, 6> kTriggers{"Reciprocity", "Consistency", "SocialProof",
                                           "Authority",   "Liking",      "Scarcity"};

// Linear predictors are kept inside a range where exp() and the IRLS working
// response stay finite.
constexpr double kEtaMin = -40.0;
constexpr double kEtaMax = 40.0;

Eigen::Map<const RowMatrix> matrix_of(const Design& d) {
    return {d.x.data(), static_cast<Eigen::Index>(d.n()), static_cast<Eigen::Index>(d.p())};
}

}  // namespace

const std::vector<std::string>& regressor_names() {
    static const std::vector<std::string> names{"Reciprocity", "Consistency", "SocialProof", "Authority",
                                                "Liking",      "Scarcity",    "SpoofDist"};
    return names;
}

const std::vector<std::string>& stepwise_order() {
    static const std::vector<std::string> order{"Reciprocity", "Consistency", "SocialProof", "Authority",
                                                "Scarcity",    "Liking",      "SpoofDist"};
    return order;
}

std::vector<std::string> model_regressors(std::string_view model_id) {
    if (model_id == "PM1") return {"Reciprocity", "Consistency", "Scarcity", "SpoofDist"};
    if (model_id == "PM2") return regressor_names();
    if (model_id.size() == 2 && model_id[0] == 'M' && model_id[1] >= '1' && model_id[1] <= '7') {
        const auto n = static_cast<std::size_t>(model_id[1] - '0');
        return {stepwise_order().begin(), stepwise_order().begin() + static_cast<std::ptrdiff_t>(n)};
    }
    throw UsageError("unknown model '" + std::string(model_id) + "' (M1..M7, PM1, PM2)");
}

double DesignRow::regressor(std::string_view name) const {
    for (std::size_t k = 0; k < kTriggers.size(); ++k)
        if (kTriggers[k] == name) return triggers[k];
    if (name == "SpoofDist") return spoof_dist;
    if (name == "VulnCount") return vuln_count();
    throw UsageError("unknown regressor '" + std::string(name) + "'");
}

double DesignRow::vuln_count() const {
    if (n_vulns) return *n_vulns;
    return static_cast<double>(std::count_if(triggers.begin(), triggers.end(), [](double t) { return t > 0; }));
}

std::vector<DesignRow> read_design_csv(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    const bool has_vulns = t.has_column("n_vulns");
    std::vector<DesignRow> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        DesignRow row;
        row.email_id = t.at(r, "email_id");
        row.clicks_avg = t.number(r, "clicks_avg");
        for (std::size_t k = 0; k < kTriggers.size(); ++k) row.triggers[k] = t.number(r, kTriggers[k]);
        row.spoof_dist = t.number(r, "spoof_dist");
        if (has_vulns && !trim(t.at(r, "n_vulns")).empty()) row.n_vulns = t.number(r, "n_vulns");
        for (double v : row.triggers)
            if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite trigger count");
        if (!std::isfinite(row.clicks_avg) || row.clicks_avg < 0)
            throw DataError(path.string() + ": clicks_avg must be a non-negative number");
        out.push_back(std::move(row));
    }
    return out;
}

void write_design_csv(const std::filesystem::path& path, std::span<const DesignRow> rows) {
    csv::Writer w(path);
    std::vector<std::string> header{"email_id", "clicks_avg"};
    header.insert(header.end(), kTriggers.begin(), kTriggers.end());
    header.push_back("spoof_dist");
    header.push_back("n_vulns");
    w.row(header);
    for (const auto& r : rows) {
        std::vector<std::string> f{r.email_id, csv::fmt(r.clicks_avg)};
        for (double t : r.triggers) f.push_back(csv::fmt(t));
        f.push_back(csv::fmt(r.spoof_dist));
        f.push_back(r.n_vulns ? csv::fmt(*r.n_vulns) : "");
        w.row(f);
    }
}

Design Design::subset(std::span<const std::size_t> rows) const {
    Design d;
    d.columns = columns;
    const std::size_t p = columns.size();
    d.x.reserve(rows.size() * p);
    for (const auto i : rows) {
        d.email_ids.push_back(email_ids[i]);
        d.y.push_back(y[i]);
        d.x.insert(d.x.end(), x.begin() + static_cast<std::ptrdiff_t>(i * p),
                   x.begin() + static_cast<std::ptrdiff_t>((i + 1) * p));
    }
    return d;
}

Design make_design(std::span<const DesignRow> rows, const std::vector<std::string>& regressors,
                   double min_clicks) {
    std::set<std::string> uniq(regressors.begin(), regressors.end());
    if (uniq.size() != regressors.size()) throw UsageError("design columns must be unique");
    Design d;
    d.columns.emplace_back(kIntercept);
    d.columns.insert(d.columns.end(), regressors.begin(), regressors.end());
    for (const auto& r : rows) {
        const double y = static_cast<double>(round_half_up(r.clicks_avg));
        if (y < min_clicks) continue;
        d.email_ids.push_back(r.email_id);
        d.y.push_back(y);
        d.x.push_back(1.0);
        for (const auto& name : regressors) d.x.push_back(r.regressor(name));
    }
    return d;
}

Design make_design(std::vector<double> y, const std::vector<std::vector<double>>& regressors,
                   std::vector<std::string> names) {
    if (regressors.size() != names.size()) throw UsageError("one name per regressor required");
    Design d;
    d.columns.emplace_back(kIntercept);
    d.columns.insert(d.columns.end(), names.begin(), names.end());
    for (std::size_t i = 0; i < y.size(); ++i) {
        d.email_ids.push_back("row" + std::to_string(i));
        d.x.push_back(1.0);
        for (const auto& col : regressors) d.x.push_back(col.at(i));
    }
    d.y = std::move(y);
    return d;
}

RegressorStats regressor_stats(const Design& d) {
    RegressorStats s;
    for (std::size_t j = 1; j < d.p(); ++j) {
        std::vector<double> col(d.n());
        for (std::size_t i = 0; i < d.n(); ++i) col[i] = d.at(i, j);
        s.names.push_back(d.columns[j]);
        s.mean.push_back(stats::mean(col));
        s.sd.push_back(stats::sd(col));
    }
    return s;
}

double PoissonFit::coefficient(std::string_view name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j] == name) return coef[j];
    throw UsageError("fit has no coefficient '" + std::string(name) + "'");
}

double poisson_loglik(std::span<const double> y, std::span<const double> mu) {
    double ll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ll -= mu[i] + std::lgamma(y[i] + 1.0);
        if (y[i] > 0) ll += y[i] * std::log(mu[i]);
    }
    return ll;
}

double poisson_deviance(std::span<const double> y, std::span<const double> mu) {
    double dev = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 0) dev += y[i] * std::log(y[i] / mu[i]);
        dev -= y[i] - mu[i];
    }
    return std::max(0.0, 2.0 * dev);
}

void check_rank(const Design& d) {
    const auto X = matrix_of(d);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> full(X);
    if (full.rank() == static_cast<Eigen::Index>(d.p())) return;
    // Name each column that adds nothing to the span of the earlier ones.
    std::string msg = "design matrix is rank deficient:";
    std::vector<Eigen::Index> kept;
    for (std::size_t j = 0; j < d.p(); ++j) {
        Eigen::MatrixXd sub(X.rows(), static_cast<Eigen::Index>(kept.size() + 1));
        for (std::size_t c = 0; c < kept.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = X.col(kept[c]);
        sub.col(static_cast<Eigen::Index>(kept.size())) = X.col(static_cast<Eigen::Index>(j));
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
        qr.setThreshold(full.threshold());
        if (qr.rank() == sub.cols()) {
            kept.push_back(static_cast<Eigen::Index>(j));
            continue;
        }
        msg += " '" + d.columns[j] + "' is collinear with";
        if (kept.empty()) {
            msg += " nothing (all zero)";
        } else {
            const Eigen::MatrixXd base = sub.leftCols(static_cast<Eigen::Index>(kept.size()));
            const Eigen::VectorXd coef = base.colPivHouseholderQr().solve(
                Eigen::VectorXd(X.col(static_cast<Eigen::Index>(j))));
            bool any = false;
            for (std::size_t c = 0; c < kept.size(); ++c)
                if (std::abs(coef(static_cast<Eigen::Index>(c))) > 1e-8) {
                    msg += " '" + d.columns[static_cast<std::size_t>(kept[c])] + "'";
                    any = true;
                }
            if (!any) msg += " earlier columns";
        }
        msg += ";";
    }
    msg.pop_back();
    throw DataError(msg);
}

PoissonFit fit_poisson(const Design& d, const FitOptions& opts) {
    const std::size_t n = d.n(), p = d.p();
    if (p == 0) throw UsageError("design has no columns");
    if (n <= p) throw DataError("need more rows (" + std::to_string(n) + ") than coefficients (" + std::to_string(p) + ")");
    for (double v : d.y)
        if (!(v >= 0) || v != std::floor(v)) throw DataError("response must be non-negative integers");
    check_rank(d);

    const auto X = matrix_of(d);
    const Eigen::Map<const Eigen::VectorXd> y(d.y.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd mu = (y.array() + 0.1).matrix();
    Eigen::VectorXd eta = mu.array().log().matrix();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    const double xty_norm = (X.transpose() * y).norm();

    PoissonFit f;
    f.columns = d.columns;
    f.n = n;
    double prev_dev = std::numeric_limits<double>::infinity();
    std::size_t stalled = 0;
    for (std::size_t it = 1; it <= opts.max_iter; ++it) {
        f.iterations = it;
        const Eigen::VectorXd sw = mu.array().sqrt().matrix();
        const Eigen::VectorXd zr = eta + ((y - mu).array() / mu.array()).matrix();
        const Eigen::MatrixXd A = sw.asDiagonal() * X;
        const Eigen::VectorXd b = sw.cwiseProduct(zr);
        const Eigen::VectorXd next = A.householderQr().solve(b);
        if (!next.allFinite()) break;
        const double step = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        eta = (X * beta).cwiseMax(kEtaMin).cwiseMin(kEtaMax);
        mu = eta.array().exp().matrix();
        f.grad_norm = (X.transpose() * (y - mu)).norm();
        if (f.grad_norm < opts.grad_tol) {
            f.converged = true;
            break;
        }
        // Rounding can hold the gradient slightly above an absolute tolerance
        // on large designs; accept once the iterates have stopped moving.
        const double dev = poisson_deviance(d.y, std::span<const double>(mu.data(), n));
        const bool flat = step <= 1e-13 * (1.0 + beta.cwiseAbs().maxCoeff()) ||
                          std::abs(prev_dev - dev) <= 1e-15 * (1.0 + dev);
        stalled = flat ? stalled + 1 : 0;
        prev_dev = dev;
        if (stalled >= 2 && f.grad_norm < opts.grad_tol * std::max(1.0, xty_norm)) {
            f.converged = true;
            break;
        }
    }

    f.coef.assign(beta.data(), beta.data() + p);
    const std::span<const double> mus(mu.data(), n);
    f.loglik = poisson_loglik(d.y, mus);
    f.deviance = poisson_deviance(d.y, mus);
    f.y_sum = std::accumulate(d.y.begin(), d.y.end(), 0.0);
    const double ybar = f.y_sum / static_cast<double>(n);
    const std::vector<double> mu0(n, ybar);
    f.null_loglik = poisson_loglik(d.y, mu0);
    f.null_deviance = poisson_deviance(d.y, mu0);
    const double K = static_cast<double>(p);
    f.adj_mcfadden_r2 = f.null_loglik != 0.0 ? 1.0 - (f.loglik - K) / f.null_loglik
                                             : std::numeric_limits<double>::quiet_NaN();

    const Eigen::MatrixXd info = X.transpose() * mu.asDiagonal() * X;
    const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                                                             static_cast<Eigen::Index>(p)));
    for (std::size_t j = 0; j < p; ++j) {
        const double v = cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
        const double se = v > 0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
        f.se.push_back(se);
        const double z = f.coef[j] / se;
        f.z.push_back(z);
        f.p_value.push_back(std::erfc(std::abs(z) / std::sqrt(2.0)));
    }
    return f;
}

std::vector<PoissonFit> stepwise(std::span<const DesignRow> rows, const std::vector<std::string>& order,
                                 double min_clicks) {
    std::vector<PoissonFit> out;
    for (std::size_t i = 1; i <= order.size(); ++i) {
        const std::vector<std::string> regs(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(i));
        out.push_back(fit_poisson(make_design(rows, regs, min_clicks)));
    }
    return out;
}

double chisq_upper_tail(double statistic, double df) {
    if (!(df > 0)) throw UsageError("chi-square df must be > 0");
    if (statistic <= 0) return 1.0;
    return boost::math::gamma_q(df / 2.0, statistic / 2.0);
}

AnovaResult anova_chisq(const PoissonFit& nested, const PoissonFit& fuller) {
    const std::set<std::string> big(fuller.columns.begin(), fuller.columns.end());
    bool subset = nested.columns.size() <= fuller.columns.size();
    for (const auto& c : nested.columns) subset = subset && big.count(c) > 0;
    if (!subset || nested.n != fuller.n || nested.y_sum != fuller.y_sum)
        throw UsageError("anova: models are not nested on the same data");
    AnovaResult r;
    r.delta_df = fuller.columns.size() - nested.columns.size();
    r.delta_deviance = std::max(0.0, nested.deviance - fuller.deviance);
    r.p_value = r.delta_df == 0 ? 1.0 : chisq_upper_tail(r.delta_deviance, static_cast<double>(r.delta_df));
    return r;
}

BootstrapFit BootstrapFit::from_draws(std::vector<std::string> columns, std::vector<std::vector<double>> draws) {
    BootstrapFit bf;
    bf.columns = std::move(columns);
    for (const auto& row : draws)
        if (row.size() != bf.columns.size()) throw UsageError("draw width differs from column count");
    bf.B = draws.size();
    bf.draws = std::move(draws);
    bf.compute_quantiles();
    return bf;
}

void BootstrapFit::compute_quantiles() {
    quantiles.clear();
    if (draws.empty()) return;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        std::vector<double> col;
        col.reserve(draws.size());
        for (const auto& r : draws) col.push_back(r[j]);
        std::sort(col.begin(), col.end());
        quantiles.push_back({stats::quantile_sorted(col, 0.025), stats::quantile_sorted(col, 0.5),
                             stats::quantile_sorted(col, 0.975)});
    }
}

BootstrapFit bootstrap_fit(const Design& d, std::size_t B, std::uint64_t seed, const FitOptions& opts) {
    if (B < kMinBootstrap) throw UsageError("bootstrap needs B >= " + std::to_string(kMinBootstrap));
    if (d.n() <= d.p()) throw DataError("need more rows than coefficients");
    std::vector<std::optional<std::vector<double>>> reps(B);
    parallel_for(B, [&](std::size_t b) {
        Rng rng = make_rng(seed, b);
        std::vector<std::size_t> rows(d.n());
        for (auto& r : rows) r = uniform_index(rng, d.n());
        try {
            const auto f = fit_poisson(d.subset(rows), opts);
            if (f.converged) reps[b] = f.coef;
        } catch (const DataError&) {
            // rank-deficient resample: dropped
        }
    });
    BootstrapFit bf;
    bf.columns = d.columns;
    bf.B = B;
    bf.seed = seed;
    for (auto& r : reps) {
        if (r) bf.draws.push_back(std::move(*r));
        else ++bf.dropped;
    }
    if (bf.dropped * 5 > B)
        bf.warning = std::to_string(bf.dropped) + " of " + std::to_string(B) + " replicates did not converge";
    bf.compute_quantiles();
    return bf;
}

std::vector<TriageScore> predict_clicks(const BootstrapFit& bf, std::span<const PredictInput> inputs,
                                        std::string_view model_id, std::size_t draws, std::uint64_t seed,
                                        const RegressorStats& training_stats) {
    if (bf.draws.empty()) throw DataError("predict: bootstrap has no draws");
    if (draws == 0) throw UsageError("predict: draws must be >= 1");
    const std::size_t K = bf.columns.size();
    if (K == 0 || bf.columns[0] != kIntercept) throw DataError("predict: first coefficient must be the intercept");
    const std::vector<std::string> regs(bf.columns.begin() + 1, bf.columns.end());
    if (!training_stats.names.empty() && training_stats.names != regs)
        throw DataError("predict: training statistics do not match the fit's regressors");
    const std::size_t B = bf.draws.size();

    std::vector<TriageScore> out(inputs.size());
    parallel_for(inputs.size(), [&](std::size_t e) {
        const auto& in = inputs[e];
        if (in.x.size() != K - 1)
            throw DataError("predict: email " + in.email_id + " has " + std::to_string(in.x.size()) +
                            " regressors, expected " + std::to_string(K - 1));
        std::vector<std::pair<double, std::size_t>> vals(B);
        for (std::size_t b = 0; b < B; ++b) {
            double lin = bf.draws[b][0];
            for (std::size_t j = 1; j < K; ++j) lin += bf.draws[b][j] * in.x[j - 1];
            vals[b] = {std::exp(lin), b};
        }
        std::vector<std::size_t> count(B, 0);
        Rng rng = make_rng(derive_seed(seed, in.email_id), 0);
        for (std::size_t s = 0; s < draws; ++s) ++count[uniform_index(rng, B)];
        std::sort(vals.begin(), vals.end());

        // Type-7 quantiles over the sampled multiset, without expanding it.
        auto value_at = [&](std::size_t pos) {
            std::size_t cum = 0;
            for (const auto& [v, b] : vals) {
                cum += count[b];
                if (pos < cum) return v;
            }
            return vals.back().first;
        };
        auto quant = [&](double p) {
            const double h = static_cast<double>(draws - 1) * p;
            const auto lo = static_cast<std::size_t>(std::floor(h));
            const double vlo = value_at(lo);
            if (lo + 1 >= draws) return vlo;
            return vlo + (h - static_cast<double>(lo)) * (value_at(lo + 1) - vlo);
        };
        double sum = 0.0;
        for (const auto& [v, b] : vals) sum += v * static_cast<double>(count[b]);

        TriageScore& t = out[e];
        t.email_id = in.email_id;
        t.model_id = std::string(model_id);
        t.predicted_clicks_mean = sum / static_cast<double>(draws);
        t.predicted_clicks_q025 = quant(0.025);
        t.predicted_clicks_q50 = quant(0.5);
        t.predicted_clicks_q975 = quant(0.975);
        t.in_domain = true;
        for (std::size_t j = 0; j < training_stats.names.size(); ++j)
            if (std::abs(in.x[j] - training_stats.mean[j]) > training_stats.sd[j]) t.in_domain = false;
    });
    return out;
}

std::vector<PredictInput> prediction_inputs(std::span<const DesignRow> rows,
                                            const std::vector<std::string>& regressors) {
    std::vector<PredictInput> out;
    for (const auto& r : rows) {
        PredictInput in{r.email_id, {}};
        for (const auto& name : regressors) in.x.push_back(r.regressor(name));
        out.push_back(std::move(in));
    }
    return out;
}

std::vector<TriageScore> triage_rank(std::vector<TriageScore> scores) {
    std::stable_sort(scores.begin(), scores.end(), [](const TriageScore& a, const TriageScore& b) {
        if (a.predicted_clicks_q50 != b.predicted_clicks_q50) return a.predicted_clicks_q50 > b.predicted_clicks_q50;
        if (a.predicted_clicks_mean != b.predicted_clicks_mean)
            return a.predicted_clicks_mean > b.predicted_clicks_mean;
        return a.email_id < b.email_id;
    });
    return scores;
}

ScanReport simple_poisson_scan(std::span<const DesignRow> rows, double min_clicks) {
    std::vector<const DesignRow*> kept;
    for (const auto& r : rows)
        if (static_cast<double>(round_half_up(r.clicks_avg)) >= min_clicks) kept.push_back(&r);
    ScanReport rep;
    std::vector<std::string> names{"VulnCount"};
    names.insert(names.end(), kTriggers.begin(), kTriggers.end());
    names.push_back("SpoofDist");
    std::vector<double> y;
    for (const auto* r : kept) y.push_back(static_cast<double>(round_half_up(r->clicks_avg)));
    for (const auto& name : names) {
        ScanResult s;
        s.regressor = name;
        s.n = kept.size();
        std::vector<double> x;
        for (const auto* r : kept) x.push_back(r->regressor(name));
        s.pearson = stats::pearson(x, y);
        s.spearman = stats::spearman(x, y);
        const bool constant = x.empty() || std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
        if (!constant && kept.size() > 2) {
            const auto f = fit_poisson(make_design(y, {x}, {name}));
            s.beta = f.coef[1];
            s.se = f.se[1];
            s.p_value = f.p_value[1];
        }
        rep.results.push_back(std::move(s));
    }
    for (const auto* r : kept)
        for (std::size_t k = 0; k < kTriggers.size(); ++k)
            rep.scatter.push_back({r->email_id, kTriggers[k], r->triggers[k],
                                   static_cast<double>(round_half_up(r->clicks_avg))});
    return rep;
}

nlohmann::json to_json(const PoissonFit& f) {
    return {{"columns", f.columns},
            {"coef", f.coef},
            {"se", f.se},
            {"z", f.z},
            {"p_value", f.p_value},
            {"loglik", f.loglik},
            {"null_loglik", f.null_loglik},
            {"deviance", f.deviance},
            {"null_deviance", f.null_deviance},
            {"adj_mcfadden_r2", f.adj_mcfadden_r2},
            {"n", f.n},
            {"converged", f.converged},
            {"iterations", f.iterations},
            {"grad_norm", f.grad_norm},
            {"y_sum", f.y_sum}};
}

namespace {

PoissonFit fit_from_json(const nlohmann::json& j) {
    PoissonFit f;
    f.columns = j.at("columns").get<std::vector<std::string>>();
    f.coef = j.at("coef").get<std::vector<double>>();
    auto nullable = [&](const char* key) {
        std::vector<double> out;
        for (const auto& v : j.at(key))
            out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
        return out;
    };
    f.se = nullable("se");
    f.z = nullable("z");
    f.p_value = nullable("p_value");
    f.loglik = j.at("loglik").get<double>();
    f.null_loglik = j.at("null_loglik").get<double>();
    f.deviance = j.at("deviance").get<double>();
    f.null_deviance = j.value("null_deviance", 0.0);
    f.adj_mcfadden_r2 = j.at("adj_mcfadden_r2").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                           : j.at("adj_mcfadden_r2").get<double>();
    f.n = j.at("n").get<std::size_t>();
    f.converged = j.at("converged").get<bool>();
    f.iterations = j.value("iterations", std::size_t{0});
    f.grad_norm = j.value("grad_norm", 0.0);
    f.y_sum = j.value("y_sum", 0.0);
    return f;
}

}  // namespace

void write_draws_binary(const std::filesystem::path& path, const std::vector<std::vector<double>>& draws) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& row : draws)
        for (double v : row) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            char buf[8];
            for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
            out.write(buf, 8);
        }
}

std::vector<std::vector<double>> read_draws_binary(const std::filesystem::path& path, std::size_t rows,
                                                   std::size_t cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
    for (auto& row : out)
        for (double& v : row) {
            unsigned char buf[8];
            if (!in.read(reinterpret_cast<char*>(buf), 8)) throw DataError(path.string() + ": truncated draws file");
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
            v = std::bit_cast<double>(bits);
        }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes in draws file");
    return out;
}

nlohmann::json to_json(const FitArtifact& a, const std::optional<std::filesystem::path>& sidecar) {
    nlohmann::json j{{"format_version", kFitFormatVersion},
                     {"model_id", a.model_id},
                     {"min_clicks", a.min_clicks},
                     {"fit", to_json(a.fit)},
                     {"training_stats",
                      {{"names", a.training_stats.names}, {"mean", a.training_stats.mean}, {"sd", a.training_stats.sd}}}};
    if (a.bootstrap) {
        const auto& b = *a.bootstrap;
        nlohmann::json q = nlohmann::json::array();
        for (const auto& row : b.quantiles) q.push_back({row[0], row[1], row[2]});
        nlohmann::json bj{{"columns", b.columns}, {"B", b.B},           {"dropped", b.dropped},
                          {"seed", b.seed},       {"quantiles", q},     {"rows", b.draws.size()}};
        if (b.warning) bj["warning"] = *b.warning;
        if (sidecar) {
            bj["draws_file"] = sidecar->filename().string();
            bj["draws_layout"] = "float64-le-row-major";
        } else {
            bj["draws"] = b.draws;
        }
        j["bootstrap"] = bj;
    }
    return j;
}

FitArtifact artifact_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    try {
        if (j.at("format_version").get<int>() != kFitFormatVersion) throw DataError("unsupported fit format_version");
        FitArtifact a;
        a.model_id = j.at("model_id").get<std::string>();
        a.min_clicks = j.value("min_clicks", kDefaultMinClicks);
        a.fit = fit_from_json(j.at("fit"));
        const auto& ts = j.at("training_stats");
        a.training_stats.names = ts.at("names").get<std::vector<std::string>>();
        a.training_stats.mean = ts.at("mean").get<std::vector<double>>();
        a.training_stats.sd = ts.at("sd").get<std::vector<double>>();
        if (j.contains("bootstrap")) {
            const auto& bj = j.at("bootstrap");
            BootstrapFit b;
            b.columns = bj.at("columns").get<std::vector<std::string>>();
            b.B = bj.at("B").get<std::size_t>();
            b.dropped = bj.at("dropped").get<std::size_t>();
            b.seed = bj.at("seed").get<std::uint64_t>();
            if (bj.contains("warning")) b.warning = bj.at("warning").get<std::string>();
            if (bj.contains("draws_file")) {
                if (bj.value("draws_layout", std::string()) != "float64-le-row-major")
                    throw DataError("unsupported draws layout");
                b.draws = read_draws_binary(base_dir / bj.at("draws_file").get<std::string>(),
                                            bj.at("rows").get<std::size_t>(), b.columns.size());
            } else {
                b.draws = bj.at("draws").get<std::vector<std::vector<double>>>();
            }
            b.compute_quantiles();
            a.bootstrap = std::move(b);
        }
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed fit artifact: ") + e.what());
    }
}

void save_artifact(const std::filesystem::path& path, const FitArtifact& a, bool binary_draws) {
    std::optional<std::filesystem::path> sidecar;
    if (binary_draws && a.bootstrap) {
        sidecar = path;
        sidecar->replace_extension(".draws.bin");
        write_draws_binary(*sidecar, a.bootstrap->draws);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json(a, sidecar).dump(1) << '\n';
}

FitArtifact load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    try {
        return artifact_from_json(nlohmann::json::parse(in), path.parent_path());
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_scores_csv(const std::filesystem::path& path, std::span<const TriageScore> scores) {
    csv::Writer w(path);
    w.row({"rank", "email_id", "model_id", "predicted_clicks_mean", "predicted_clicks_q025", "predicted_clicks_q50",
           "predicted_clicks_q975", "in_domain"});
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& s = scores[i];
        w.row({std::to_string(i + 1), s.email_id, s.model_id, csv::fmt(s.predicted_clicks_mean),
               csv::fmt(s.predicted_clicks_q025), csv::fmt(s.predicted_clicks_q50), csv::fmt(s.predicted_clicks_q975),
               s.in_domain ? "true" : "false"});
    }
}

std::vector<TriageScore> read_scores_csv(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    std::vector<TriageScore> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        TriageScore s;
        s.email_id = t.at(r, "email_id");
        s.model_id = t.at(r, "model_id");
        s.predicted_clicks_mean = t.number(r, "predicted_clicks_mean");
        s.predicted_clicks_q025 = t.number(r, "predicted_clicks_q025");
        s.predicted_clicks_q50 = t.number(r, "predicted_clicks_q50");
        s.predicted_clicks_q975 = t.number(r, "predicted_clicks_q975");
        const auto dom = trim(t.at(r, "in_domain"));
        if (dom != "true" && dom != "false") throw DataError(path.string() + ": in_domain must be true or false");
        s.in_domain = dom == "true";
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace phishtriage::econ
