#ifndef CASCADE_LAB_WEIGHTS_HPP
#define CASCADE_LAB_WEIGHTS_HPP

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "cascade_lab/errors.hpp"
#include "cascade_lab/rational.hpp"
#include "cascade_lab/tree_words.hpp"

namespace cascade_lab {

/// Law of a single strictly positive, mean-one cascade weight.
class WeightLaw {
public:
    enum class Type { constant, two_point, discrete, lognormal };

    static WeightLaw constant() {
        WeightLaw w(Type::constant);
        w.values_ = {Rational(1)};
        w.probs_ = {Rational(1)};
        w.cache_doubles();
        return w;
    }

    /// Value a with probability p, b with probability 1-p; pa + (1-p)b = 1.
    static WeightLaw two_point(Rational a, Rational b, Rational p) {
        if (p < 0 || p > 1) throw ArgumentError("two_point: p must lie in [0,1]");
        WeightLaw w(Type::two_point);
        w.values_ = {std::move(a), std::move(b)};
        w.probs_ = {p, Rational(1 - p)};
        w.validate_finite();
        return w;
    }

    static WeightLaw discrete(std::vector<Rational> values, std::vector<Rational> probs) {
        if (values.empty() || values.size() != probs.size())
            throw ArgumentError("discrete: values and probs must be nonempty and of equal length");
        WeightLaw w(Type::discrete);
        w.values_ = std::move(values);
        w.probs_ = std::move(probs);
        w.validate_finite();
        return w;
    }

    /// exp(N(-σ²/2, σ²)), so that E(W) = 1.
    static WeightLaw lognormal(double sigma) {
        if (!(sigma >= 0) || !std::isfinite(sigma)) throw ArgumentError("lognormal: sigma must be finite and >= 0");
        WeightLaw w(Type::lognormal);
        w.sigma_ = sigma;
        return w;
    }

    Type type() const noexcept { return type_; }
    double sigma() const noexcept { return sigma_; }
    const std::vector<Rational>& raw_values() const noexcept { return values_; }
    const std::vector<Rational>& raw_probs() const noexcept { return probs_; }

    bool finite_support() const noexcept { return type_ != Type::lognormal; }

    /// Atoms with positive probability.
    std::vector<std::pair<Rational, Rational>> support() const {
        if (!finite_support()) throw UnsupportedLawError("lognormal law has no finite support");
        std::vector<std::pair<Rational, Rational>> atoms;
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (probs_[i] > 0) atoms.emplace_back(values_[i], probs_[i]);
        return atoms;
    }

    /// E(W^j), exact.
    Rational moment_exact(unsigned j) const {
        if (!finite_support()) throw UnsupportedLawError("lognormal law has no exact rational moments");
        Rational sum = 0;
        for (std::size_t i = 0; i < values_.size(); ++i) sum += probs_[i] * ipow(values_[i], j);
        return sum;
    }

    /// E(W^q) for real q > 0.
    double moment_real(double q) const {
        if (type_ == Type::lognormal) return std::exp(0.5 * q * (q - 1.0) * sigma_ * sigma_);
        if (is_integer_exponent(q) && q >= 0) return to_double(moment_exact(static_cast<unsigned>(q)));
        double sum = 0;
        for (std::size_t i = 0; i < values_.size(); ++i) sum += to_double(probs_[i]) * real_pow(values_[i], q);
        return sum;
    }

    /// Moment in the requested scalar mode.
    template <class Scalar>
    Scalar moment(unsigned j) const {
        if constexpr (std::is_same_v<Scalar, Rational>) {
            return moment_exact(j);
        } else {
            return moment_real(static_cast<double>(j));
        }
    }

    /// Inverse-CDF draw from uniforms u1, u2 in (0,1); u2 is used only by
    /// the lognormal (Box-Muller).
    double sample(double u1, double u2) const {
        if (type_ == Type::lognormal) {
            double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
            return std::exp(sigma_ * z - 0.5 * sigma_ * sigma_);
        }
        double acc = 0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
            acc += prob_double(i);
            if (u1 < acc) return value_double(i);
        }
        // u1 landed in rounding slack above the last cumulative sum.
        for (std::size_t i = values_.size(); i-- > 0;)
            if (probs_[i] > 0) return value_double(i);
        return 1.0;
    }

    friend bool operator==(const WeightLaw& a, const WeightLaw& b) {
        return a.type_ == b.type_ && a.values_ == b.values_ && a.probs_ == b.probs_ && a.sigma_ == b.sigma_;
    }

    std::string describe() const {
        switch (type_) {
        case Type::constant:
            return "constant";
        case Type::two_point:
            return "two_point(" + to_string(values_[0]) + "," + to_string(values_[1]) + "," + to_string(probs_[0]) + ")";
        case Type::discrete: {
            std::string s = "discrete(";
            for (std::size_t i = 0; i < values_.size(); ++i)
                s += (i ? "," : "") + to_string(values_[i]) + "@" + to_string(probs_[i]);
            return s + ")";
        }
        case Type::lognormal:
            return "lognormal(" + std::to_string(sigma_) + ")";
        }
        return "?";
    }

private:
    explicit WeightLaw(Type t) : type_(t) {}

    void validate_finite() {
        Rational total = 0, mean = 0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (values_[i] <= 0) throw ArgumentError("weight values must be strictly positive");
            if (probs_[i] < 0) throw ArgumentError("probabilities must be nonnegative");
            total += probs_[i];
            mean += probs_[i] * values_[i];
        }
        if (total != 1) throw ArgumentError("probabilities must sum to exactly 1 (got " + to_string(total) + ")");
        if (mean != 1) throw ArgumentError("weight law must have mean exactly 1 (got " + to_string(mean) + ")");
        cache_doubles();
    }

    void cache_doubles() {
        values_d_.clear();
        probs_d_.clear();
        for (const auto& v : values_) values_d_.push_back(to_double(v));
        for (const auto& p : probs_) probs_d_.push_back(to_double(p));
    }
    double value_double(std::size_t i) const { return values_d_[i]; }
    double prob_double(std::size_t i) const { return probs_d_[i]; }

    Type type_;
    std::vector<Rational> values_;
    std::vector<Rational> probs_;
    std::vector<double> values_d_;
    std::vector<double> probs_d_;
    double sigma_ = 0.0;
};

/// Assignment of weight laws to the non-root vertices of T_k.
class WeightModel {
public:
    enum class Assignment { homogeneous, per_depth, per_vertex };

    static WeightModel homogeneous(WeightLaw law) {
        WeightModel m(Assignment::homogeneous);
        m.laws_ = {std::move(law)};
        return m;
    }

    /// laws[d-1] governs depth d; shorter lists repeat cyclically.
    static WeightModel per_depth(std::vector<WeightLaw> laws) {
        if (laws.empty()) throw ArgumentError("per_depth model needs at least one law");
        WeightModel m(Assignment::per_depth);
        m.laws_ = std::move(laws);
        return m;
    }

    /// Table-driven rule: vertex -> index into laws; unlisted vertices use
    /// laws[default_index].
    static WeightModel per_vertex(std::vector<WeightLaw> laws, std::map<Word, std::size_t> table,
                                  std::size_t default_index = 0) {
        if (laws.empty()) throw ArgumentError("per_vertex model needs at least one law");
        if (default_index >= laws.size()) throw ArgumentError("per_vertex default law index out of range");
        for (const auto& [v, idx] : table) {
            if (v.empty()) throw ArgumentError("the root carries no weight");
            if (idx >= laws.size()) throw ArgumentError("per_vertex law index out of range");
        }
        WeightModel m(Assignment::per_vertex);
        m.laws_ = std::move(laws);
        m.table_ = std::move(table);
        m.default_index_ = default_index;
        return m;
    }

    Assignment assignment() const noexcept { return assignment_; }
    const std::vector<WeightLaw>& laws() const noexcept { return laws_; }
    const std::map<Word, std::size_t>& table() const noexcept { return table_; }
    std::size_t default_index() const noexcept { return default_index_; }

    bool depth_homogeneous() const noexcept { return assignment_ != Assignment::per_vertex; }

    /// Law of vertices at depth d >= 1 (depth-homogeneous models).
    const WeightLaw& depth_law(int d) const {
        if (d < 1) throw ArgumentError("the root carries no weight");
        if (assignment_ == Assignment::homogeneous) return laws_.front();
        if (assignment_ == Assignment::per_depth) return laws_[static_cast<std::size_t>(d - 1) % laws_.size()];
        return laws_[default_index_];
    }

    const WeightLaw& law_at(const Word& v) const {
        if (v.empty()) throw ArgumentError("the root carries no weight");
        if (assignment_ != Assignment::per_vertex) return depth_law(static_cast<int>(v.size()));
        auto it = table_.find(v);
        return laws_[it == table_.end() ? default_index_ : it->second];
    }

    bool all_finite_support() const noexcept {
        for (const auto& l : laws_)
            if (!l.finite_support()) return false;
        return true;
    }

    void validate(const TreeShape& shape) const {
        for (const auto& [v, idx] : table_)
            if (!v.valid_for(shape.m) || static_cast<int>(v.size()) > shape.k)
                throw ArgumentError("per_vertex rule names vertex '" + v.to_string() + "' outside T_k");
    }

private:
    explicit WeightModel(Assignment a) : assignment_(a) {}

    Assignment assignment_;
    std::vector<WeightLaw> laws_;
    std::map<Word, std::size_t> table_;
    std::size_t default_index_ = 0;
};

} // namespace cascade_lab

#endif // CASCADE_LAB_WEIGHTS_HPP
