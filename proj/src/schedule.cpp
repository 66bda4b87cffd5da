#include "lumir/schedule.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lumir {

double NoiseSchedule::alpha(int t) const {
    if (t < 1 || t > steps) throw std::invalid_argument("alpha: t out of range");
    return alphas[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > steps) throw std::invalid_argument("alpha_bar: t out of range");
    return t == 0 ? 1.0 : alpha_bars[static_cast<size_t>(t - 1)];
}

int ScalingSchedule::factor(int t) const {
    if (t < 0 || t > steps()) throw std::invalid_argument("scaling factor: t out of range");
    return factors[static_cast<size_t>(t)];
}

int ScalingSchedule::ratio(int t) const {
    if (t < 1 || t > steps()) throw std::invalid_argument("scaling ratio: t out of range");
    return factors[static_cast<size_t>(t)] / factors[static_cast<size_t>(t - 1)];
}

void validate_schedule(const NoiseSchedule& ns) {
    if (ns.steps < 1) throw std::invalid_argument("noise schedule: steps must be >= 1");
    if (static_cast<int>(ns.alphas.size()) != ns.steps ||
        static_cast<int>(ns.alpha_bars.size()) != ns.steps) {
        throw std::invalid_argument("noise schedule: array lengths do not match steps");
    }
    double running = 1.0;
    for (int t = 1; t <= ns.steps; ++t) {
        double a = ns.alphas[static_cast<size_t>(t - 1)];
        if (!(a > 0.0 && a < 1.0)) {
            throw std::invalid_argument("noise schedule: alpha_" + std::to_string(t) +
                                        " must lie strictly in (0,1)");
        }
        if (t > 1 && a > ns.alphas[static_cast<size_t>(t - 2)]) {
            throw std::invalid_argument("noise schedule: alphas must be nonincreasing");
        }
        running *= a;
        double ab = ns.alpha_bars[static_cast<size_t>(t - 1)];
        if (std::abs(ab - running) > 1e-12 * std::abs(running)) {
            throw std::invalid_argument("noise schedule: alpha_bar_" + std::to_string(t) +
                                        " is not the running product");
        }
        if (t > 1 && ab >= ns.alpha_bars[static_cast<size_t>(t - 2)]) {
            throw std::invalid_argument("noise schedule: alpha_bars must be strictly decreasing");
        }
    }
}

void validate_schedule(const ScalingSchedule& ss) {
    if (ss.factors.empty() || ss.factors[0] != 1) {
        throw std::invalid_argument("scaling schedule: U_0 must be 1");
    }
    for (size_t t = 1; t < ss.factors.size(); ++t) {
        int cur = ss.factors[t], prev = ss.factors[t - 1];
        if (cur < prev) throw std::invalid_argument("scaling schedule: factors must not decrease");
        if (cur % prev != 0) {
            throw std::invalid_argument("scaling schedule: ratio U_" + std::to_string(t) + "/U_" +
                                        std::to_string(t - 1) + " is not an integer");
        }
    }
}

NoiseSchedule build_noise_schedule(int steps, const NoiseSpec& spec) {
    if (steps < 1) throw std::invalid_argument("build_noise_schedule: steps must be >= 1");
    NoiseSchedule ns;
    ns.steps = steps;
    if (!spec.explicit_alphas.empty()) {
        if (static_cast<int>(spec.explicit_alphas.size()) != steps) {
            throw std::invalid_argument("build_noise_schedule: expected " + std::to_string(steps) +
                                        " explicit alphas");
        }
        ns.alphas = spec.explicit_alphas;
    } else {
        if (!(spec.alpha_bar_start > 0.0 && spec.alpha_bar_start < 1.0) ||
            !(spec.alpha_bar_end > 0.0 && spec.alpha_bar_end < spec.alpha_bar_start)) {
            throw std::invalid_argument(
                "build_noise_schedule: need 0 < alpha_bar_end < alpha_bar_start < 1");
        }
        ns.alphas.resize(static_cast<size_t>(steps));
        double prev = 1.0;
        for (int t = 1; t <= steps; ++t) {
            double ab = steps == 1 ? spec.alpha_bar_end
                                   : spec.alpha_bar_start +
                                         (spec.alpha_bar_end - spec.alpha_bar_start) *
                                             (static_cast<double>(t - 1) / (steps - 1));
            ns.alphas[static_cast<size_t>(t - 1)] = ab / prev;
            prev = ab;
        }
    }
    ns.alpha_bars.resize(static_cast<size_t>(steps));
    double running = 1.0;
    for (int t = 1; t <= steps; ++t) {
        running *= ns.alphas[static_cast<size_t>(t - 1)];
        ns.alpha_bars[static_cast<size_t>(t - 1)] = running;
    }
    validate_schedule(ns);
    return ns;
}

ScalingSchedule build_scaling_schedule(int steps, const ScalingSpec& spec) {
    if (steps < 1) throw std::invalid_argument("build_scaling_schedule: steps must be >= 1");
    ScalingSchedule ss;
    ss.factors.assign(static_cast<size_t>(steps) + 1, 1);
    std::vector<int> ratio(static_cast<size_t>(steps) + 1, 1);
    for (const auto& [t, r] : spec) {
        if (t < 1 || t > steps) {
            throw std::invalid_argument("build_scaling_schedule: change step " +
                                        std::to_string(t) + " outside [1," +
                                        std::to_string(steps) + "]");
        }
        if (r < 2) {
            throw std::invalid_argument(
                "build_scaling_schedule: ratio must be an integer >= 2, got " + std::to_string(r));
        }
        if (ratio[static_cast<size_t>(t)] != 1) {
            throw std::invalid_argument("build_scaling_schedule: duplicate change at t=" +
                                        std::to_string(t));
        }
        ratio[static_cast<size_t>(t)] = r;
    }
    for (int t = 1; t <= steps; ++t) {
        ss.factors[static_cast<size_t>(t)] =
            ss.factors[static_cast<size_t>(t - 1)] * ratio[static_cast<size_t>(t)];
    }
    validate_schedule(ss);
    return ss;
}

std::pair<NoiseSchedule, ScalingSchedule> build_schedules(int steps, const NoiseSpec& noise_spec,
                                                          const ScalingSpec& scaling_spec) {
    return {build_noise_schedule(steps, noise_spec), build_scaling_schedule(steps, scaling_spec)};
}

ScheduleSpec default_schedule_spec() { return ScheduleSpec{}; }

void schedule_spec_to_config(const ScheduleSpec& spec, KvConfig& out) {
    out.set_int("schedule.steps", spec.steps);
    out.set_double("schedule.alpha_bar_start", spec.noise.alpha_bar_start);
    out.set_double("schedule.alpha_bar_end", spec.noise.alpha_bar_end);
    std::ostringstream os;
    for (size_t i = 0; i < spec.scaling.size(); ++i) {
        if (i) os << ",";
        os << spec.scaling[i].first << ":" << spec.scaling[i].second;
    }
    out.set("schedule.scaling_steps", os.str());
}

ScheduleSpec schedule_spec_from_config(const KvConfig& cfg) {
    ScheduleSpec spec = default_schedule_spec();
    spec.steps = cfg.get_int("schedule.steps", spec.steps);
    spec.noise.alpha_bar_start =
        cfg.get_double("schedule.alpha_bar_start", spec.noise.alpha_bar_start);
    spec.noise.alpha_bar_end = cfg.get_double("schedule.alpha_bar_end", spec.noise.alpha_bar_end);
    if (cfg.has("schedule.scaling_steps")) {
        spec.scaling.clear();
        std::string s = cfg.get_str("schedule.scaling_steps");
        std::istringstream is(s);
        std::string item;
        while (std::getline(is, item, ',')) {
            if (item.empty()) continue;
            size_t colon = item.find(':');
            if (colon == std::string::npos) {
                throw std::invalid_argument("schedule.scaling_steps: expected t:ratio, got '" +
                                            item + "'");
            }
            spec.scaling.emplace_back(std::stoi(item.substr(0, colon)),
                                      std::stoi(item.substr(colon + 1)));
        }
    }
    return spec;
}

}  // namespace lumir
