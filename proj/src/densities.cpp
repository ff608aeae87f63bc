#include "aggdens/densities.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "aggdens/errors.hpp"

namespace aggdens {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double normal_pdf(double x, double mu, double var) {
    const double z = x - mu;
    return std::exp(-0.5 * z * z / var) / std::sqrt(kTwoPi * var);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

DensityModel DensityModel::gaussian_mixture(
    std::vector<double> weights, std::vector<std::vector<double>> means,
    std::vector<std::vector<double>> variances) {
    if (weights.empty() || weights.size() != means.size() ||
        weights.size() != variances.size())
        throw std::invalid_argument("gaussian_mixture: inconsistent component counts");
    const std::size_t d = means[0].size();
    double wsum = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] < 0.0)
            throw std::invalid_argument("gaussian_mixture: negative weight");
        wsum += weights[j];
        if (means[j].size() != d || variances[j].size() != d)
            throw std::invalid_argument("gaussian_mixture: inconsistent dimensions");
        for (double v : variances[j])
            if (!(v > 0.0))
                throw std::invalid_argument("gaussian_mixture: nonpositive variance");
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("gaussian_mixture: weights must sum to 1");

    DensityModel m;
    m.kind_ = Kind::gaussian_mixture;
    m.d_ = static_cast<int>(d);
    m.weights_ = std::move(weights);
    m.means_ = std::move(means);
    m.vars_ = std::move(variances);
    double bound = 0.0;
    for (std::size_t j = 0; j < m.weights_.size(); ++j) {
        double modal = m.weights_[j];
        for (std::size_t k = 0; k < d; ++k) modal /= std::sqrt(kTwoPi * m.vars_[j][k]);
        bound += modal;
    }
    m.sup_bound_ = bound;
    m.window_ = m.support_window(0);
    return m;
}

DensityModel DensityModel::exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be > 0");
    DensityModel m;
    m.kind_ = Kind::exponential;
    m.d_ = 1;
    m.rate_ = rate;
    m.sup_bound_ = rate;
    m.window_ = {0.0, 40.0 / rate};
    m.breakpoints_ = {0.0};
    return m;
}

DensityModel DensityModel::block_oscillator(int blocks, double gaussian_weight) {
    if (blocks < 1) throw std::invalid_argument("block_oscillator: need T >= 1");
    if (!(gaussian_weight >= 0.0 && gaussian_weight <= 1.0))
        throw std::invalid_argument("block_oscillator: weight must be a probability");
    DensityModel m;
    m.kind_ = Kind::block_oscillator;
    m.d_ = 1;
    m.blocks_ = blocks;
    m.gauss_w_ = gaussian_weight;
    m.sup_bound_ = gaussian_weight / std::sqrt(kTwoPi) + (1.0 - gaussian_weight);
    m.window_ = {-8.0, 8.0};
    m.breakpoints_.reserve(2 * blocks);
    const double T = blocks;
    for (int i = 0; i < blocks; ++i) {
        m.breakpoints_.push_back(2.0 * i / T);
        m.breakpoints_.push_back((2.0 * i + 1.0) / T);
    }
    return m;
}

DensityModel DensityModel::custom(CustomSpec spec) {
    if (!spec.evaluator || !spec.sampler)
        throw std::invalid_argument("custom density needs evaluator and sampler");
    DensityModel m;
    m.kind_ = Kind::custom;
    m.d_ = spec.d;
    m.sup_bound_ = spec.sup_norm_bound;
    m.window_ = spec.window;
    m.breakpoints_ = spec.breakpoints;
    m.custom_ = std::make_shared<const CustomSpec>(std::move(spec));
    return m;
}

double DensityModel::eval(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != d_)
        throw std::invalid_argument("eval: dimension mismatch");
    for (double c : x)
        if (!std::isfinite(c)) throw std::invalid_argument("eval: non-finite point");
    switch (kind_) {
        case Kind::gaussian_mixture: {
            double s = 0.0;
            for (std::size_t j = 0; j < weights_.size(); ++j) {
                double term = weights_[j];
                for (int k = 0; k < d_; ++k)
                    term *= normal_pdf(x[k], means_[j][k], vars_[j][k]);
                s += term;
            }
            return s;
        }
        case Kind::exponential:
            return x[0] < 0.0 ? 0.0 : rate_ * std::exp(-rate_ * x[0]);
        case Kind::block_oscillator: {
            double s = gauss_w_ * normal_pdf(x[0], 0.0, 1.0);
            // block i (1-based) covers (2(i-1)/T, (2i-1)/T]
            const double T = blocks_;
            const double u = x[0] * T;
            if (u > 0.0 && u <= 2.0 * blocks_ - 1.0) {
                const double frac = u - 2.0 * std::floor(u / 2.0);
                if (frac > 0.0 && frac <= 1.0) s += 1.0 - gauss_w_;
            }
            return s;
        }
        case Kind::custom:
            return custom_->evaluator(x);
    }
    return 0.0;
}

double DensityModel::eval1(double x) const { return eval(std::span(&x, 1)); }

SamplePoints DensityModel::sample(int n, const SeedPath& seed) const {
    if (n < 1) throw std::invalid_argument("sample: need n >= 1");
    SamplePoints s;
    s.n = n;
    s.d = d_;
    s.provenance = seed;
    s.pts.resize(static_cast<std::size_t>(n) * d_);
    StreamRng rng(seed);
    switch (kind_) {
        case Kind::gaussian_mixture: {
            std::vector<double> cum(weights_.size());
            double acc = 0.0;
            for (std::size_t j = 0; j < weights_.size(); ++j) {
                acc += weights_[j];
                cum[j] = acc;
            }
            for (int i = 0; i < n; ++i) {
                const double u = rng.uniform();
                std::size_t j = 0;
                while (j + 1 < cum.size() && u >= cum[j]) ++j;
                for (int k = 0; k < d_; ++k)
                    s.pts[static_cast<std::size_t>(i) * d_ + k] =
                        means_[j][k] + std::sqrt(vars_[j][k]) * rng.normal();
            }
            break;
        }
        case Kind::exponential:
            for (int i = 0; i < n; ++i) s.pts[i] = rng.exponential(rate_);
            break;
        case Kind::block_oscillator: {
            const double T = blocks_;
            for (int i = 0; i < n; ++i) {
                if (rng.uniform() < gauss_w_) {
                    s.pts[i] = rng.normal();
                } else {
                    const auto j = rng.below(static_cast<std::uint64_t>(blocks_));
                    s.pts[i] = (2.0 * static_cast<double>(j) + rng.uniform_pos()) / T;
                }
            }
            break;
        }
        case Kind::custom:
            custom_->sampler(n, rng, s.pts);
            break;
    }
    return s;
}

bool DensityModel::has_char_fn() const {
    if (kind_ == Kind::custom) return static_cast<bool>(custom_->char_fn);
    return true;
}

std::complex<double> DensityModel::char_fn(std::span<const double> t) const {
    if (static_cast<int>(t.size()) != d_)
        throw std::invalid_argument("char_fn: dimension mismatch");
    using namespace std::complex_literals;
    switch (kind_) {
        case Kind::gaussian_mixture: {
            std::complex<double> s = 0.0;
            for (std::size_t j = 0; j < weights_.size(); ++j) {
                double dot = 0.0, quad = 0.0;
                for (int k = 0; k < d_; ++k) {
                    dot += t[k] * means_[j][k];
                    quad += t[k] * t[k] * vars_[j][k];
                }
                s += weights_[j] * std::exp(std::complex<double>(-0.5 * quad, dot));
            }
            return s;
        }
        case Kind::exponential:
            return rate_ / std::complex<double>(rate_, -t[0]);
        case Kind::block_oscillator: {
            const double tv = t[0];
            const double T = blocks_;
            std::complex<double> blocks_cf;
            if (std::abs(tv) < 1e-8) {
                // midpoint expansion; error O((t/T)^2) per block
                blocks_cf = 0.0;
                for (int j = 0; j < blocks_; ++j)
                    blocks_cf += std::exp(1i * tv * ((2.0 * j + 0.5) / T)) / T;
            } else {
                const std::complex<double> it(0.0, tv);
                const std::complex<double> seg = (std::exp(it / T) - 1.0) / it;
                std::complex<double> phase_sum = 0.0;
                for (int j = 0; j < blocks_; ++j)
                    phase_sum += std::exp(it * (2.0 * j / T));
                blocks_cf = seg * phase_sum;
            }
            return gauss_w_ * std::exp(-0.5 * tv * tv) + (1.0 - gauss_w_) * blocks_cf;
        }
        case Kind::custom:
            if (!custom_->char_fn)
                throw UnsupportedCapability(
                    "custom density has no characteristic function");
            return custom_->char_fn(t);
    }
    return 0.0;
}

std::complex<double> DensityModel::char_fn1(double t) const {
    return char_fn(std::span(&t, 1));
}

double DensityModel::sup_norm_bound() const { return sup_bound_; }

std::pair<double, double> DensityModel::support_window(int axis) const {
    if (axis < 0 || axis >= d_)
        throw std::invalid_argument("support_window: bad axis");
    if (kind_ == Kind::gaussian_mixture) {
        double lo = means_[0][axis], hi = means_[0][axis], smax = 0.0;
        for (std::size_t j = 0; j < weights_.size(); ++j) {
            lo = std::min(lo, means_[j][axis]);
            hi = std::max(hi, means_[j][axis]);
            smax = std::max(smax, std::sqrt(vars_[j][axis]));
        }
        return {lo - 8.0 * smax, hi + 8.0 * smax};
    }
    return window_;
}

const std::vector<double>& DensityModel::breakpoints() const { return breakpoints_; }

bool DensityModel::has_cdf1() const {
    if (d_ != 1) return false;
    if (kind_ == Kind::custom) return static_cast<bool>(custom_->cdf1);
    return true;
}

double DensityModel::cdf1(double x) const {
    if (d_ != 1) throw UnsupportedCapability("cdf1: only for d = 1");
    switch (kind_) {
        case Kind::gaussian_mixture: {
            double s = 0.0;
            for (std::size_t j = 0; j < weights_.size(); ++j)
                s += weights_[j] * normal_cdf((x - means_[j][0]) / std::sqrt(vars_[j][0]));
            return s;
        }
        case Kind::exponential:
            return x <= 0.0 ? 0.0 : 1.0 - std::exp(-rate_ * x);
        case Kind::block_oscillator: {
            double s = gauss_w_ * normal_cdf(x);
            const double T = blocks_;
            double mass = 0.0;
            for (int j = 0; j < blocks_; ++j)
                mass += std::clamp(T * x - 2.0 * j, 0.0, 1.0);
            return s + (1.0 - gauss_w_) * mass / T;
        }
        case Kind::custom:
            if (!custom_->cdf1) throw UnsupportedCapability("custom density has no cdf");
            return custom_->cdf1(x);
    }
    return 0.0;
}

std::string DensityModel::to_json() const {
    nlohmann::json j;
    switch (kind_) {
        case Kind::gaussian_mixture:
            j["variant"] = "gaussian_mixture";
            j["weights"] = weights_;
            j["means"] = means_;
            j["variances"] = vars_;
            break;
        case Kind::exponential:
            j["variant"] = "exponential";
            j["rate"] = rate_;
            break;
        case Kind::block_oscillator:
            j["variant"] = "block_oscillator";
            j["blocks"] = blocks_;
            j["gaussian_weight"] = gauss_w_;
            break;
        case Kind::custom:
            throw UnsupportedCapability("custom densities are not serializable");
    }
    return j.dump(2);
}

DensityModel DensityModel::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text, nullptr, true, true);
    const std::string variant = j.at("variant").get<std::string>();
    if (variant == "gaussian_mixture")
        return gaussian_mixture(j.at("weights").get<std::vector<double>>(),
                                j.at("means").get<std::vector<std::vector<double>>>(),
                                j.at("variances").get<std::vector<std::vector<double>>>());
    if (variant == "exponential") return exponential(j.at("rate").get<double>());
    if (variant == "block_oscillator")
        return block_oscillator(j.at("blocks").get<int>(),
                                j.value("gaussian_weight", 0.5));
    throw ConfigError("unknown density variant: " + variant);
}

DensityModel standard_gaussian(int d) {
    std::vector<double> mean(d, 0.0), var(d, 1.0);
    return DensityModel::gaussian_mixture({1.0}, {mean}, {var});
}

// Marron & Wand (1992), density #10 ("claw"):
// N(0,1)/2 + sum_{l=0..4} N(l/2 - 1, (1/10)^2)/10.
DensityModel claw_density() {
    std::vector<double> w{0.5};
    std::vector<std::vector<double>> mu{{0.0}}, var{{1.0}};
    for (int l = 0; l <= 4; ++l) {
        w.push_back(0.1);
        mu.push_back({l / 2.0 - 1.0});
        var.push_back({0.01});
    }
    return DensityModel::gaussian_mixture(w, mu, var);
}

// Marron & Wand (1992), density #14 ("smooth comb"):
// sum_{l=0..5} 2^{5-l}/63 * N((65 - 96/2^l)/21, (32/63)^2 / 4^l).
DensityModel smooth_comb_density() {
    std::vector<double> w;
    std::vector<std::vector<double>> mu, var;
    for (int l = 0; l <= 5; ++l) {
        const double pw = std::pow(2.0, l);
        w.push_back(std::pow(2.0, 5 - l) / 63.0);
        mu.push_back({(65.0 - 96.0 / pw) / 21.0});
        const double sd = (32.0 / 63.0) / pw;
        var.push_back({sd * sd});
    }
    return DensityModel::gaussian_mixture(w, mu, var);
}

DensityModel dens1() { return DensityModel::block_oscillator(14, 0.5); }
DensityModel dens2() { return DensityModel::block_oscillator(10, 0.5); }

DensityModel density_by_name(const std::string& name) {
    if (name == "gaussian") return standard_gaussian(1);
    if (name == "exponential") return DensityModel::exponential(1.0);
    if (name == "claw") return claw_density();
    if (name == "smooth_comb") return smooth_comb_density();
    if (name == "dens1") return dens1();
    if (name == "dens2") return dens2();
    throw ConfigError("unknown density: " + name);
}

SamplePoints read_sample_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sample file: " + path);
    SamplePoints s;
    s.d = 0;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> coords;
        double v;
        while (ls >> v) coords.push_back(v);
        if (coords.empty()) continue;
        if (s.d == 0) s.d = static_cast<int>(coords.size());
        if (static_cast<int>(coords.size()) != s.d)
            throw std::runtime_error("inconsistent dimension in sample file: " + path);
        s.pts.insert(s.pts.end(), coords.begin(), coords.end());
        ++s.n;
    }
    if (s.n == 0) throw std::runtime_error("empty sample file: " + path);
    return s;
}

void write_sample_file(const std::string& path, const SamplePoints& sample) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write sample file: " + path);
    out << "# n=" << sample.n << " d=" << sample.d << "\n";
    char buf[64];
    for (int i = 0; i < sample.n; ++i) {
        for (int k = 0; k < sample.d; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", sample.pts[static_cast<std::size_t>(i) * sample.d + k]);
            out << (k ? " " : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace aggdens
