#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "avgtrack/error.hpp"
#include "avgtrack/matrix.hpp"

namespace avgtrack {

/// Reference-signal generator ṙ = A·r + B·f.
struct Plant {
    Mat A;
    Mat B;

    Plant(Mat a, Mat b) : A(std::move(a)), B(std::move(b)) {
        if (!A.is_square()) fail(ErrorKind::input, "plant: A must be square, got " + A.shape());
        if (B.rows() != A.rows()) fail(ErrorKind::input, "plant: B shape " + B.shape() + " incompatible with A " + A.shape());
        if (A.rows() == 0) fail(ErrorKind::input, "plant: state dimension must be positive");
    }

    std::size_t state_dim() const noexcept { return A.rows(); }
    std::size_t input_dim() const noexcept { return B.cols(); }
};

struct ZeroInput {
    friend bool operator==(const ZeroInput&, const ZeroInput&) = default;
};

struct ConstantInput {
    Vec value;
    friend bool operator==(const ConstantInput&, const ConstantInput&) = default;
};

/// f(t) = amplitude · sin(omega·t + phase), one amplitude per channel.
struct SinusoidInput {
    Vec amplitude;
    double omega = 1.0;
    double phase = 0.0;
    friend bool operator==(const SinusoidInput&, const SinusoidInput&) = default;
};

using InputSpec = std::variant<ZeroInput, ConstantInput, SinusoidInput>;

/// Per-agent reference inputs, all with p channels.
class InputFamily {
public:
    InputFamily(std::vector<InputSpec> specs, std::size_t channels) : specs_(std::move(specs)), channels_(channels) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const std::size_t width = std::visit(
                [&](const auto& s) -> std::size_t {
                    using T = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<T, ZeroInput>) {
                        return channels_;
                    } else if constexpr (std::is_same_v<T, ConstantInput>) {
                        check_finite(s.value, i);
                        return s.value.size();
                    } else {
                        check_finite(s.amplitude, i);
                        if (!std::isfinite(s.omega) || !std::isfinite(s.phase))
                            fail(ErrorKind::input, "input " + std::to_string(i) + ": omega/phase must be finite");
                        return s.amplitude.size();
                    }
                },
                specs_[i]);
            if (width != channels_) {
                fail(ErrorKind::input, "input " + std::to_string(i) + " has " + std::to_string(width) +
                                           " channels, plant expects " + std::to_string(channels_));
            }
        }
    }

    /// Same input for every agent.
    static InputFamily uniform(InputSpec spec, std::size_t agents, std::size_t channels) {
        return InputFamily(std::vector<InputSpec>(agents, std::move(spec)), channels);
    }

    std::size_t agent_count() const noexcept { return specs_.size(); }
    std::size_t channels() const noexcept { return channels_; }
    const std::vector<InputSpec>& specs() const noexcept { return specs_; }
    const InputSpec& spec(std::size_t i) const { return specs_.at(i); }

    friend bool operator==(const InputFamily&, const InputFamily&) = default;

private:
    static void check_finite(const Vec& v, std::size_t i) {
        for (double x : v)
            if (!std::isfinite(x)) fail(ErrorKind::input, "input " + std::to_string(i) + " has a non-finite value");
    }

    std::vector<InputSpec> specs_;
    std::size_t channels_;
};

/// Single-channel sinusoids with amplitude (k+2)/2 for zero-based agent k,
/// i.e. (i+1)/2·sin t for one-based agent i.
inline InputFamily staggered_sinusoids(std::size_t agents) {
    std::vector<InputSpec> specs;
    for (std::size_t k = 0; k < agents; ++k) specs.push_back(SinusoidInput{{(static_cast<double>(k) + 2.0) / 2.0}, 1.0, 0.0});
    return InputFamily(std::move(specs), 1);
}

inline Vec input_value(const InputFamily& fam, std::size_t i, double t) {
    if (i >= fam.agent_count()) {
        fail(ErrorKind::input, "input_value: agent " + std::to_string(i) + " out of range (" +
                                   std::to_string(fam.agent_count()) + " agents)");
    }
    return std::visit(
        [&](const auto& s) -> Vec {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ZeroInput>) {
                return Vec(fam.channels(), 0.0);
            } else if constexpr (std::is_same_v<T, ConstantInput>) {
                return s.value;
            } else {
                const double phase = std::sin(s.omega * t + s.phase);
                Vec out(s.amplitude.size());
                for (std::size_t k = 0; k < out.size(); ++k) out[k] = s.amplitude[k] * phase;
                return out;
            }
        },
        fam.spec(i));
}

/// f₀ = sup over agents and time of ‖f_i(t)‖₂. Exact for the closed families above.
inline double input_bound(const InputFamily& fam) {
    double bound = 0.0;
    for (const auto& spec : fam.specs()) {
        const double b = std::visit(
            [](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, ZeroInput>) {
                    return 0.0;
                } else if constexpr (std::is_same_v<T, ConstantInput>) {
                    return norm2(s.value);
                } else {
                    // a zero frequency freezes sin at its phase
                    return s.omega == 0.0 ? norm2(s.amplitude) * std::abs(std::sin(s.phase)) : norm2(s.amplitude);
                }
            },
            spec);
        bound = std::max(bound, b);
    }
    return bound;
}

inline Vec reference_derivative(const Plant& p, std::span<const double> r, std::span<const double> f) {
    if (r.size() != p.state_dim() || f.size() != p.input_dim()) {
        fail(ErrorKind::input, "reference_derivative: got r of size " + std::to_string(r.size()) + " and f of size " +
                                   std::to_string(f.size()) + " for plant " + p.A.shape() + "/" + p.B.shape());
    }
    Vec out = p.A * r;
    const Vec bf = p.B * f;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += bf[k];
    return out;
}

}  // namespace avgtrack
