#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>
#include <sys/wait.h>

namespace testsupport {

namespace fs = std::filesystem;

std::string Gen::string(std::string_view alphabet, std::size_t max_len) {
    std::string s;
    const std::size_t len = index(max_len + 1);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[index(alphabet.size())];
    return s;
}

std::string Gen::unicode_string(std::size_t max_len) {
    static const std::vector<std::string> pieces{"a", "b", "z", "é", "ß", "ø", "中", "文", "\xF0\x9F\x98\x80"};
    std::string s;
    const std::size_t len = index(max_len + 1);
    for (std::size_t i = 0; i < len; ++i) s += pieces[index(pieces.size())];
    return s;
}

std::vector<std::string> Gen::words(std::size_t n, std::size_t vocab) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(index(vocab)));
    return out;
}

std::size_t for_all(std::size_t cases, std::uint64_t seed, const std::function<bool(Gen&)>& body) {
    for (std::size_t c = 0; c < cases; ++c) {
        Gen g(phishtriage::derive_seed(seed, c));
        if (!body(g)) return c;
    }
    return SIZE_MAX;
}

TempDir::TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("pt-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t levenshtein_recursive(const std::u32string& a, const std::u32string& b) {
    // d(i, j) = distance between the suffixes a[i..] and b[j..].
    std::vector<long> memo((a.size() + 1) * (b.size() + 1), -1);
    std::function<long(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> long {
        if (i == a.size()) return static_cast<long>(b.size() - j);
        if (j == b.size()) return static_cast<long>(a.size() - i);
        long& m = memo[i * (b.size() + 1) + j];
        if (m >= 0) return m;
        const long sub = d(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
        m = std::min({d(i + 1, j) + 1, d(i, j + 1) + 1, sub});
        return m;
    };
    return static_cast<std::size_t>(d(0, 0));
}

double dense_cosine(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::string, std::pair<double, double>> counts;
    for (const auto& t : a) counts[t].first += 1.0;
    for (const auto& t : b) counts[t].second += 1.0;
    double ab = 0, aa = 0, bb = 0;
    for (const auto& [t, c] : counts) {
        ab += c.first * c.second;
        aa += c.first * c.first;
        bb += c.second * c.second;
    }
    if (aa == 0 || bb == 0) return 0.0;
    return std::clamp(ab / std::sqrt(aa * bb), 0.0, 1.0);
}

std::vector<std::size_t> brute_components(const std::vector<std::vector<double>>& scores, double threshold) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> label(n);
    for (std::size_t i = 0; i < n; ++i) label[i] = i;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j && scores[i][j] >= threshold && label[j] < label[i]) {
                    label[i] = label[j];
                    changed = true;
                }
    }
    return label;
}

GridOptimum exhaustive_grid(const std::vector<std::vector<double>>& scores, const std::vector<std::string>& groups) {
    GridOptimum g;
    const std::size_t n = scores.size();
    for (int k = 0; k <= 100; ++k) {
        const double t = k / 100.0;
        double tp = 0, fn = 0, tn = 0, fp = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool same = groups[i] == groups[j];
                const bool dup = scores[i][j] >= t;
                if (same) (dup ? tp : fn) += 1;
                else (dup ? fp : tn) += 1;
            }
        g.sensitivity.push_back(tp + fn > 0 ? tp / (tp + fn) : 0.0);
        g.specificity.push_back(tn + fp > 0 ? tn / (tn + fp) : 0.0);
    }
    double best = 1e300;
    for (int k = 0; k <= 100; ++k) {
        const double gap = std::abs(g.sensitivity[k] - g.specificity[k]);
        if (gap <= best) {
            best = gap;
            g.threshold = k / 100.0;
        }
    }
    return g;
}

namespace {

double loglik_at(const std::vector<double>& y, const std::vector<std::vector<double>>& x,
                 const std::vector<double>& b) {
    double ll = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double eta = 0;
        for (std::size_t j = 0; j < b.size(); ++j) eta += x[i][j] * b[j];
        ll += y[i] * eta - std::exp(eta) - std::lgamma(y[i] + 1.0);
    }
    return ll;
}

std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> rhs) {
    const std::size_t p = rhs.size();
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(rhs[c], rhs[piv]);
        for (std::size_t r = c + 1; r < p; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < p; ++k) a[r][k] -= f * a[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    std::vector<double> x(p);
    for (std::size_t c = p; c-- > 0;) {
        double s = rhs[c];
        for (std::size_t k = c + 1; k < p; ++k) s -= a[c][k] * x[k];
        x[c] = s / a[c][c];
    }
    return x;
}

}  // namespace

NewtonFit newton_poisson(const std::vector<double>& y, const std::vector<std::vector<double>>& x) {
    const std::size_t p = x.front().size();
    NewtonFit f;
    f.coef.assign(p, 0.0);
    double ybar = 0;
    for (double v : y) ybar += v;
    f.coef[0] = std::log(std::max(ybar / static_cast<double>(y.size()), 1e-8));
    f.loglik = loglik_at(y, x, f.coef);
    for (int it = 0; it < 200; ++it) {
        std::vector<double> grad(p, 0.0);
        std::vector<std::vector<double>> hess(p, std::vector<double>(p, 0.0));
        for (std::size_t i = 0; i < y.size(); ++i) {
            double eta = 0;
            for (std::size_t j = 0; j < p; ++j) eta += x[i][j] * f.coef[j];
            const double mu = std::exp(eta);
            for (std::size_t j = 0; j < p; ++j) {
                grad[j] += (y[i] - mu) * x[i][j];
                for (std::size_t k = 0; k < p; ++k) hess[j][k] += mu * x[i][j] * x[i][k];
            }
        }
        const auto step = solve(hess, grad);
        double scale = 1.0;
        std::vector<double> next(p);
        double ll = 0;
        for (int h = 0; h < 60; ++h) {
            for (std::size_t j = 0; j < p; ++j) next[j] = f.coef[j] + scale * step[j];
            ll = loglik_at(y, x, next);
            if (ll >= f.loglik - 1e-12) break;
            scale /= 2;
        }
        const double gain = ll - f.loglik;
        f.coef = next;
        f.loglik = ll;
        if (std::abs(gain) < 1e-13 * (1.0 + std::abs(ll))) {
            f.converged = true;
            break;
        }
    }
    return f;
}

double chisq_tail_simpson(double statistic, double df, std::size_t intervals) {
    // Density of u = sqrt(t): 2 u^(df-1) exp(-u^2/2) / (2^(df/2) Gamma(df/2)).
    const double lognorm = (df / 2.0) * std::log(2.0) + std::lgamma(df / 2.0);
    auto g = [&](double u) {
        if (u <= 0.0) return df == 1.0 ? 2.0 * std::exp(-lognorm) : 0.0;
        return 2.0 * std::exp((df - 1.0) * std::log(u) - u * u / 2.0 - lognorm);
    };
    const double lo = std::sqrt(statistic);
    const double hi = lo + 60.0;
    if (intervals % 2) ++intervals;
    const double h = (hi - lo) / static_cast<double>(intervals);
    double s = g(lo) + g(hi);
    for (std::size_t i = 1; i < intervals; ++i) s += g(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

int run_triage(const std::string& args, const std::string& log_path) {
#ifdef TRIAGE_BIN
    const std::string cmd = std::string(TRIAGE_BIN) + " " + args + " >" + log_path + " 2>&1";
#else
    const std::string cmd = "triage " + args + " >" + log_path + " 2>&1";
#endif
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace testsupport
