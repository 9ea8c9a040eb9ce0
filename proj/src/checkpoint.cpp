#include "gsflow/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gsflow {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'F', 'C'};
constexpr uint32_t kVersion = 1;

class Writer {
public:
    void u8(uint8_t v) { buf_.append(reinterpret_cast<const char*>(&v), 1); }
    void u32(uint32_t v) { buf_.append(reinterpret_cast<const char*>(&v), 4); }
    void u64(uint64_t v) { buf_.append(reinterpret_cast<const char*>(&v), 8); }
    void f64(double v) { buf_.append(reinterpret_cast<const char*>(&v), 8); }
    void f64_array(const Eigen::VectorXd& v) {
        buf_.append(reinterpret_cast<const char*>(v.data()),
                    static_cast<size_t>(v.size()) * sizeof(double));
    }
    void bytes(const std::string& s) { buf_.append(s); }
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}
    uint8_t u8() { return *reinterpret_cast<const uint8_t*>(take(1)); }
    uint32_t u32() {
        uint32_t v;
        std::memcpy(&v, take(4), 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        std::memcpy(&v, take(8), 8);
        return v;
    }
    double f64() {
        double v;
        std::memcpy(&v, take(8), 8);
        return v;
    }
    Eigen::VectorXd f64_array(size_t n) {
        Eigen::VectorXd v(n);
        std::memcpy(v.data(), take(n * sizeof(double)), n * sizeof(double));
        return v;
    }
    std::string bytes(size_t n) { return std::string(take(n), n); }
    bool done() const { return pos_ == data_.size(); }

private:
    const char* take(size_t n) {
        if (pos_ + n > data_.size()) throw std::runtime_error("checkpoint: truncated section");
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::string data_;
    size_t pos_ = 0;
};

void write_param(Writer& w, const ParamTensor& p) {
    w.u32(static_cast<uint32_t>(p.shape.size()));
    for (int d : p.shape) w.u32(static_cast<uint32_t>(d));
    w.f64_array(p.values);
}

void read_param(Reader& r, ParamTensor& p) {
    const uint32_t ndims = r.u32();
    std::vector<int> shape(ndims);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    if (shape != p.shape) throw std::runtime_error("checkpoint: parameter shape mismatch");
    p.values = r.f64_array(static_cast<size_t>(p.size()));
    p.zero_grad();
}

std::string encode_net(const Mlp& net) {
    Writer w;
    const auto params = net.params();
    w.u32(static_cast<uint32_t>(params.size()));
    for (const auto* p : params) write_param(w, *p);
    return w.str();
}

void decode_net(const std::string& payload, Mlp& net) {
    Reader r(payload);
    auto params = net.params();
    if (r.u32() != params.size()) throw std::runtime_error("checkpoint: net tensor count mismatch");
    for (auto* p : params) read_param(r, *p);
}

std::string encode_adam(const AdamOpt& opt) {
    Writer w;
    w.u32(static_cast<uint32_t>(opt.states.size()));
    for (const auto& s : opt.states) {
        w.u64(static_cast<uint64_t>(s.m.size()));
        w.u64(static_cast<uint64_t>(s.step));
        w.f64(s.lr);
        w.f64(s.beta1);
        w.f64(s.beta2);
        w.f64(s.eps);
        w.f64_array(s.m);
        w.f64_array(s.v);
    }
    return w.str();
}

void decode_adam(const std::string& payload, AdamOpt& opt) {
    Reader r(payload);
    if (r.u32() != opt.states.size()) throw std::runtime_error("checkpoint: adam state count mismatch");
    for (auto& s : opt.states) {
        const uint64_t len = r.u64();
        if (len != static_cast<uint64_t>(s.m.size()))
            throw std::runtime_error("checkpoint: adam length mismatch");
        s.step = static_cast<long>(r.u64());
        s.lr = r.f64();
        s.beta1 = r.f64();
        s.beta2 = r.f64();
        s.eps = r.f64();
        s.m = r.f64_array(len);
        s.v = r.f64_array(len);
    }
}

std::string encode_buffer(const ReplayBuffer& buf) {
    Writer w;
    w.u64(buf.capacity());
    w.u64(buf.head());
    w.u64(buf.size());
    for (size_t i = 0; i < buf.size(); ++i) {
        const Transition& t = buf.storage()[i];
        w.u32(static_cast<uint32_t>(t.state.size()));
        w.f64_array(t.state);
        w.f64(t.action.x());
        w.f64(t.action.y());
        w.f64(t.reward);
        w.f64_array(t.next_state);
        w.u8(t.done ? 1 : 0);
    }
    return w.str();
}

void decode_buffer(const std::string& payload, ReplayBuffer& buf) {
    Reader r(payload);
    const uint64_t capacity = r.u64();
    if (capacity != buf.capacity()) throw std::runtime_error("checkpoint: buffer capacity mismatch");
    const uint64_t head = r.u64();
    const uint64_t count = r.u64();
    std::vector<Transition> storage;
    storage.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        Transition t;
        const uint32_t sd = r.u32();
        t.state = r.f64_array(sd);
        t.action.x() = r.f64();
        t.action.y() = r.f64();
        t.reward = r.f64();
        t.next_state = r.f64_array(sd);
        t.done = r.u8() != 0;
        storage.push_back(std::move(t));
    }
    buf.restore(std::move(storage), head, count);
}

struct NetEntry {
    const char* name;
    Mlp* net;
};

std::vector<NetEntry> net_entries(Trainer& t) {
    return {
        {"teacher", &t.teacher.velocity_net},
        {"q1", &t.critic.q1},
        {"q2", &t.critic.q2},
        {"q1_target", &t.critic.q1_target},
        {"q2_target", &t.critic.q2_target},
        {"encoder", &t.cvae.encoder},
        {"decoder", &t.cvae.decoder},
        {"trunk", &t.actor.trunk},
        {"mean_head", &t.actor.mean_head},
        {"log_std_head", &t.actor.log_std_head},
    };
}

struct AdamEntry {
    const char* name;
    AdamOpt* opt;
};

std::vector<AdamEntry> adam_entries(Trainer& t) {
    return {
        {"teacher", &t.opt_teacher}, {"q1", &t.opt_q1},
        {"q2", &t.opt_q2},           {"encoder", &t.opt_encoder},
        {"decoder", &t.opt_decoder}, {"actor", &t.opt_actor},
    };
}

struct RngEntry {
    const char* name;
    RandomStream* rng;
};

std::vector<RngEntry> rng_entries(Trainer& t) {
    return {
        {"batch", &t.rng_batch}, {"teacher", &t.rng_teacher}, {"candidate", &t.rng_candidate},
        {"cvae", &t.rng_cvae},   {"actor", &t.rng_actor},     {"env", &t.rng_env},
        {"eval", &t.rng_eval},
    };
}

void write_section(std::ostream& os, const std::string& name, const std::string& payload) {
    const uint32_t name_len = static_cast<uint32_t>(name.size());
    os.write(reinterpret_cast<const char*>(&name_len), 4);
    os.write(name.data(), name.size());
    const uint64_t payload_len = payload.size();
    os.write(reinterpret_cast<const char*>(&payload_len), 8);
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

std::map<std::string, std::string> read_sections(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t version;
    is.read(reinterpret_cast<char*>(&version), 4);
    if (!is || version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    std::map<std::string, std::string> sections;
    while (true) {
        uint32_t name_len;
        is.read(reinterpret_cast<char*>(&name_len), 4);
        if (is.eof()) break;
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint64_t payload_len;
        is.read(reinterpret_cast<char*>(&payload_len), 8);
        std::string payload(payload_len, '\0');
        is.read(payload.data(), static_cast<std::streamsize>(payload_len));
        if (!is) throw std::runtime_error("checkpoint: truncated section " + name);
        sections.emplace(std::move(name), std::move(payload));
    }
    return sections;
}

const std::string& need(const std::map<std::string, std::string>& sections,
                        const std::string& name) {
    const auto it = sections.find(name);
    if (it == sections.end()) throw std::runtime_error("checkpoint: missing section " + name);
    return it->second;
}

}  // namespace

void save_checkpoint(const std::string& path, const Trainer& trainer) {
    Trainer& t = const_cast<Trainer&>(trainer);  // entries need non-const handles; nothing mutates
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    os.write(kMagic, 4);
    os.write(reinterpret_cast<const char*>(&kVersion), 4);

    write_section(os, "config", t.cfg.to_text());
    {
        Writer w;
        w.u64(static_cast<uint64_t>(t.offline_done));
        w.u64(static_cast<uint64_t>(t.online_done));
        w.u8(t.phase == Phase::online ? 1 : 0);
        write_section(os, "progress", w.str());
    }
    for (const auto& e : net_entries(t)) write_section(os, std::string("net.") + e.name, encode_net(*e.net));
    {
        Writer w;
        write_param(w, t.temp.log_alpha2);
        w.f64(t.temp.target_entropy);
        write_section(os, "temp", w.str());
    }
    for (const auto& e : adam_entries(t)) write_section(os, std::string("adam.") + e.name, encode_adam(*e.opt));
    {
        Writer w;
        w.u32(1);
        w.u64(static_cast<uint64_t>(t.temp.opt.m.size()));
        w.u64(static_cast<uint64_t>(t.temp.opt.step));
        w.f64(t.temp.opt.lr);
        w.f64(t.temp.opt.beta1);
        w.f64(t.temp.opt.beta2);
        w.f64(t.temp.opt.eps);
        w.f64_array(t.temp.opt.m);
        w.f64_array(t.temp.opt.v);
        write_section(os, "adam.temp", w.str());
    }
    for (const auto& e : rng_entries(t)) write_section(os, std::string("rng.") + e.name, e.rng->serialize());
    write_section(os, "buffer.online", encode_buffer(t.online_buf));
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

TrainConfig checkpoint_config(const std::string& path) {
    const auto sections = read_sections(path);
    return TrainConfig::from_text(need(sections, "config"));
}

void restore_checkpoint_state(const std::string& path, Trainer& t) {
    const auto sections = read_sections(path);
    {
        Reader r(need(sections, "progress"));
        t.offline_done = static_cast<long>(r.u64());
        t.online_done = static_cast<long>(r.u64());
        t.phase = r.u8() ? Phase::online : Phase::offline;
    }
    for (const auto& e : net_entries(t)) decode_net(need(sections, std::string("net.") + e.name), *e.net);
    {
        Reader r(need(sections, "temp"));
        read_param(r, t.temp.log_alpha2);
        t.temp.target_entropy = r.f64();
    }
    for (const auto& e : adam_entries(t)) decode_adam(need(sections, std::string("adam.") + e.name), *e.opt);
    {
        Reader r(need(sections, "adam.temp"));
        if (r.u32() != 1) throw std::runtime_error("checkpoint: bad temp adam section");
        const uint64_t len = r.u64();
        if (len != static_cast<uint64_t>(t.temp.opt.m.size()))
            throw std::runtime_error("checkpoint: temp adam length mismatch");
        t.temp.opt.step = static_cast<long>(r.u64());
        t.temp.opt.lr = r.f64();
        t.temp.opt.beta1 = r.f64();
        t.temp.opt.beta2 = r.f64();
        t.temp.opt.eps = r.f64();
        t.temp.opt.m = r.f64_array(len);
        t.temp.opt.v = r.f64_array(len);
    }
    for (const auto& e : rng_entries(t)) e.rng->deserialize(need(sections, std::string("rng.") + e.name));
    decode_buffer(need(sections, "buffer.online"), t.online_buf);
}

std::unique_ptr<Trainer> load_checkpoint(const std::string& path, bool load_dataset) {
    const TrainConfig cfg = checkpoint_config(path);
    auto trainer = std::make_unique<Trainer>(cfg);
    restore_checkpoint_state(path, *trainer);
    if (load_dataset) trainer->load_offline_dataset_file(cfg.dataset_path);
    return trainer;
}

}  // namespace gsflow
