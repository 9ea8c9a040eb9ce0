#include "gsflow/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace gsflow {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::ours: return "ours";
        case Variant::ours_wo_ce: return "ours_wo_ce";
        case Variant::fql: return "fql";
        case Variant::fql_wo_q: return "fql_wo_q";
        case Variant::bc: return "bc";
    }
    throw std::logic_error("variant_name: bad enum");
}

Variant variant_from_name(const std::string& name) {
    if (name == "ours") return Variant::ours;
    if (name == "ours_wo_ce") return Variant::ours_wo_ce;
    if (name == "fql") return Variant::fql;
    if (name == "fql_wo_q") return Variant::fql_wo_q;
    if (name == "bc") return Variant::bc;
    throw std::invalid_argument("unknown variant: " + name);
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

long parse_long(const std::string& key, const std::string& v) {
    size_t pos = 0;
    long out;
    try {
        out = std::stol(v, &pos);
    } catch (...) {
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    }
    if (pos != v.size()) throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (...) {
        throw std::invalid_argument("config: bad real for " + key + ": " + v);
    }
    if (pos != v.size()) throw std::invalid_argument("config: bad real for " + key + ": " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: bad bool for " + key + ": " + v);
}

struct Field {
    const char* key;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        {"seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_long("seed", v); },
         [](const TrainConfig& c) { return std::to_string(c.seed); }},
        {"offline_steps",
         [](TrainConfig& c, const std::string& v) { c.offline_steps = parse_long("offline_steps", v); },
         [](const TrainConfig& c) { return std::to_string(c.offline_steps); }},
        {"online_steps",
         [](TrainConfig& c, const std::string& v) { c.online_steps = parse_long("online_steps", v); },
         [](const TrainConfig& c) { return std::to_string(c.online_steps); }},
        {"batch_size",
         [](TrainConfig& c, const std::string& v) { c.batch_size = static_cast<int>(parse_long("batch_size", v)); },
         [](const TrainConfig& c) { return std::to_string(c.batch_size); }},
        {"n_cand",
         [](TrainConfig& c, const std::string& v) { c.n_cand = static_cast<int>(parse_long("n_cand", v)); },
         [](const TrainConfig& c) { return std::to_string(c.n_cand); }},
        {"euler_steps",
         [](TrainConfig& c, const std::string& v) { c.euler_steps = static_cast<int>(parse_long("euler_steps", v)); },
         [](const TrainConfig& c) { return std::to_string(c.euler_steps); }},
        {"latent_dim",
         [](TrainConfig& c, const std::string& v) { c.latent_dim = static_cast<int>(parse_long("latent_dim", v)); },
         [](const TrainConfig& c) { return std::to_string(c.latent_dim); }},
        {"kl_weight",
         [](TrainConfig& c, const std::string& v) { c.kl_weight = parse_double("kl_weight", v); },
         [](const TrainConfig& c) { return fmt17(c.kl_weight); }},
        {"recon_weight",
         [](TrainConfig& c, const std::string& v) { c.recon_weight = parse_double("recon_weight", v); },
         [](const TrainConfig& c) { return fmt17(c.recon_weight); }},
        {"alpha1_offline",
         [](TrainConfig& c, const std::string& v) { c.alpha1_offline = parse_double("alpha1_offline", v); },
         [](const TrainConfig& c) { return fmt17(c.alpha1_offline); }},
        {"alpha1_online",
         [](TrainConfig& c, const std::string& v) { c.alpha1_online = parse_double("alpha1_online", v); },
         [](const TrainConfig& c) { return fmt17(c.alpha1_online); }},
        {"entropy_mult",
         [](TrainConfig& c, const std::string& v) { c.entropy_mult = parse_double("entropy_mult", v); },
         [](const TrainConfig& c) { return fmt17(c.entropy_mult); }},
        {"gamma", [](TrainConfig& c, const std::string& v) { c.gamma = parse_double("gamma", v); },
         [](const TrainConfig& c) { return fmt17(c.gamma); }},
        {"tau", [](TrainConfig& c, const std::string& v) { c.tau = parse_double("tau", v); },
         [](const TrainConfig& c) { return fmt17(c.tau); }},
        {"teacher_lr",
         [](TrainConfig& c, const std::string& v) { c.teacher_lr = parse_double("teacher_lr", v); },
         [](const TrainConfig& c) { return fmt17(c.teacher_lr); }},
        {"critic_lr",
         [](TrainConfig& c, const std::string& v) { c.critic_lr = parse_double("critic_lr", v); },
         [](const TrainConfig& c) { return fmt17(c.critic_lr); }},
        {"actor_lr",
         [](TrainConfig& c, const std::string& v) { c.actor_lr = parse_double("actor_lr", v); },
         [](const TrainConfig& c) { return fmt17(c.actor_lr); }},
        {"cvae_lr",
         [](TrainConfig& c, const std::string& v) { c.cvae_lr = parse_double("cvae_lr", v); },
         [](const TrainConfig& c) { return fmt17(c.cvae_lr); }},
        {"alpha_lr",
         [](TrainConfig& c, const std::string& v) { c.alpha_lr = parse_double("alpha_lr", v); },
         [](const TrainConfig& c) { return fmt17(c.alpha_lr); }},
        {"alpha2_init",
         [](TrainConfig& c, const std::string& v) { c.alpha2_init = parse_double("alpha2_init", v); },
         [](const TrainConfig& c) { return fmt17(c.alpha2_init); }},
        {"balanced_sampling",
         [](TrainConfig& c, const std::string& v) { c.balanced_sampling = parse_bool("balanced_sampling", v); },
         [](const TrainConfig& c) { return std::string(c.balanced_sampling ? "true" : "false"); }},
        {"variant",
         [](TrainConfig& c, const std::string& v) { c.variant = variant_from_name(v); },
         [](const TrainConfig& c) { return variant_name(c.variant); }},
        {"eval_episodes",
         [](TrainConfig& c, const std::string& v) { c.eval_episodes = static_cast<int>(parse_long("eval_episodes", v)); },
         [](const TrainConfig& c) { return std::to_string(c.eval_episodes); }},
        {"eval_interval",
         [](TrainConfig& c, const std::string& v) { c.eval_interval = parse_long("eval_interval", v); },
         [](const TrainConfig& c) { return std::to_string(c.eval_interval); }},
        {"hidden_dim",
         [](TrainConfig& c, const std::string& v) { c.hidden_dim = static_cast<int>(parse_long("hidden_dim", v)); },
         [](const TrainConfig& c) { return std::to_string(c.hidden_dim); }},
        {"online_buffer_capacity",
         [](TrainConfig& c, const std::string& v) { c.online_buffer_capacity = parse_long("online_buffer_capacity", v); },
         [](const TrainConfig& c) { return std::to_string(c.online_buffer_capacity); }},
        {"per_crescent",
         [](TrainConfig& c, const std::string& v) { c.per_crescent = static_cast<int>(parse_long("per_crescent", v)); },
         [](const TrainConfig& c) { return std::to_string(c.per_crescent); }},
        {"background",
         [](TrainConfig& c, const std::string& v) { c.background = static_cast<int>(parse_long("background", v)); },
         [](const TrainConfig& c) { return std::to_string(c.background); }},
        {"dataset_path",
         [](TrainConfig& c, const std::string& v) { c.dataset_path = v; },
         [](const TrainConfig& c) { return c.dataset_path; }},
        {"reward_moderate",
         [](TrainConfig& c, const std::string& v) { c.reward_moderate = parse_double("reward_moderate", v); },
         [](const TrainConfig& c) { return fmt17(c.reward_moderate); }},
        {"reward_mid",
         [](TrainConfig& c, const std::string& v) { c.reward_mid = parse_double("reward_mid", v); },
         [](const TrainConfig& c) { return fmt17(c.reward_mid); }},
        {"reward_max",
         [](TrainConfig& c, const std::string& v) { c.reward_max = parse_double("reward_max", v); },
         [](const TrainConfig& c) { return fmt17(c.reward_max); }},
    };
    return f;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(*this, value);
            return;
        }
    }
    throw std::invalid_argument("config: unknown key: " + key);
}

std::string TrainConfig::to_text() const {
    std::ostringstream os;
    for (const auto& f : fields()) os << f.key << "=" << f.get(*this) << "\n";
    return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
    TrainConfig c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '='");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const size_t ke = key.find_last_not_of(" \t");
        key = key.substr(0, ke + 1);
        const size_t vb = value.find_first_not_of(" \t");
        value = vb == std::string::npos ? "" : value.substr(vb);
        c.set(key, value);
    }
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return from_text(ss.str());
}

void TrainConfig::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("config: cannot write " + path);
    os << to_text();
}

void TrainConfig::apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override must be key=value: " + ov);
        set(ov.substr(0, eq), ov.substr(eq + 1));
    }
}

}  // namespace gsflow
