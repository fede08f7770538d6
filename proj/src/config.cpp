#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "t3cbf/harness.hpp"

namespace t3cbf::sim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw std::invalid_argument("config: '" + key + "' " + what);
}

const json& object(const json& j, const std::string& key) {
    if (!j.is_object()) fail(key, "must be an object");
    return j;
}

double number(const json& j, const std::string& key) {
    if (!j.is_number()) fail(key, "must be a number");
    return j.get<double>();
}

bool boolean(const json& j, const std::string& key) {
    if (!j.is_boolean()) fail(key, "must be true or false");
    return j.get<bool>();
}

std::string text(const json& j, const std::string& key) {
    if (!j.is_string()) fail(key, "must be a string");
    return j.get<std::string>();
}

void read_smoothing(const json& j, smooth::SmoothingParams& s) {
    for (const auto& [k, v] : object(j, "smoothing").items()) {
        const std::string key = "smoothing." + k;
        if (k == "alpha_max") s.alpha_max = number(v, key);
        else if (k == "alpha_abs") s.alpha_abs = number(v, key);
        else if (k == "eps_sqrt") s.eps_sqrt = number(v, key);
        else if (k == "switch_threshold") s.switch_threshold = number(v, key);
        else if (k == "max") {
            const std::string m = text(v, key);
            if (m == "lse") s.max_variant = smooth::MaxVariant::LSE;
            else if (m == "boltzmann") s.max_variant = smooth::MaxVariant::Boltzmann;
            else fail(key, "must be \"lse\" or \"boltzmann\"");
        } else if (k == "abs") {
            const std::string m = text(v, key);
            if (m == "xtanh") s.abs_variant = smooth::AbsVariant::XTanh;
            else if (m == "sqrt") s.abs_variant = smooth::AbsVariant::Sqrt;
            else fail(key, "must be \"xtanh\" or \"sqrt\"");
        } else fail(key, "is not a known key");
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        fail("smoothing", e.what());
    }
}

int kind_index(const std::string& name, const std::string& key) {
    for (int k = 0; k < safety::kConstraintKinds; ++k)
        if (safety::kind_name(static_cast<safety::ConstraintKind>(k)) == name) return k;
    fail(key, "is not a constraint kind");
}

}  // namespace

EpisodeConfig parse_episode_config(const std::string& input) {
    json root;
    try {
        root = json::parse(input);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
    }
    EpisodeConfig c;
    for (const auto& [k, v] : object(root, "<root>").items()) {
        if (k == "dt") c.dt = number(v, k);
        else if (k == "duration") c.duration = number(v, k);
        else if (k == "cbf") c.cbf = boolean(v, k);
        else if (k == "body_height") c.planner.body_height = number(v, k);
        else if (k == "w_delta") c.filter.w_delta = number(v, k);
        else if (k == "smoothing") read_smoothing(v, c.constraints.smoothing);
        else if (k == "start") {
            for (const auto& [s, sv] : object(v, k).items()) {
                const std::string key = "start." + s;
                if (s == "x") c.start_xy.x() = number(sv, key);
                else if (s == "y") c.start_xy.y() = number(sv, key);
                else if (s == "yaw") c.start_yaw = number(sv, key);
                else fail(key, "is not a known key");
            }
        } else if (k == "gains") {
            for (const auto& [g, gv] : object(v, k).items()) {
                const std::string key = "gains." + g;
                const double lambda = number(gv, key);
                if (!(lambda > 0.0)) fail(key, "must be positive");
                if (g == "collision") c.constraints.lambda_collision = lambda;
                else if (g == "toe") c.constraints.lambda_toe = lambda;
                else if (g == "joint") c.constraints.lambda_joint = lambda;
                else if (g == "default") c.constraints.lambda_default = lambda;
                else fail(key, "is not a known key");
            }
        } else if (k == "enabled") {
            for (const auto& [e, ev] : object(v, k).items()) {
                const std::string key = "enabled." + e;
                c.constraints.enabled[static_cast<std::size_t>(kind_index(e, key))] = boolean(ev, key);
            }
        } else if (k == "gait") {
            for (const auto& [g, gv] : object(v, k).items()) {
                const std::string key = "gait." + g;
                if (g == "cycle") c.planner.gait.cycle = number(gv, key);
                else if (g == "apex") c.planner.plan.apex = number(gv, key);
                else fail(key, "is not a known key");
            }
        } else fail(k, "is not a known key");
    }
    try {
        c.validate();
        c.planner.gait.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    return c;
}

EpisodeConfig load_episode_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_episode_config(ss.str());
}

}  // namespace t3cbf::sim
