#include "gsflow/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsflow {

const char* kMetricsHeader =
    "step,phase,critic_loss,cfm_loss,vae_recon,vae_kl,actor_total,distill,q_term,entropy,"
    "alpha2,eval_return_mean,eval_return_std,mode_coverage,q_bias";

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
}

std::optional<double> parse_cell(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

}  // namespace

std::string metrics_row_to_csv(const MetricsRow& r) {
    std::ostringstream os;
    os << r.step << "," << r.phase << "," << cell(r.critic_loss) << "," << cell(r.cfm_loss) << ","
       << cell(r.vae_recon) << "," << cell(r.vae_kl) << "," << cell(r.actor_total) << ","
       << cell(r.distill) << "," << cell(r.q_term) << "," << cell(r.entropy) << ","
       << cell(r.alpha2) << "," << cell(r.eval_return_mean) << "," << cell(r.eval_return_std)
       << "," << cell(r.mode_coverage) << "," << cell(r.q_bias);
    return os.str();
}

MetricsRow metrics_row_from_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string tok;
    std::stringstream ss(line);
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    cells.resize(15);
    MetricsRow r;
    r.step = std::stol(cells[0]);
    r.phase = cells[1];
    r.critic_loss = parse_cell(cells[2]);
    r.cfm_loss = parse_cell(cells[3]);
    r.vae_recon = parse_cell(cells[4]);
    r.vae_kl = parse_cell(cells[5]);
    r.actor_total = parse_cell(cells[6]);
    r.distill = parse_cell(cells[7]);
    r.q_term = parse_cell(cells[8]);
    r.entropy = parse_cell(cells[9]);
    r.alpha2 = parse_cell(cells[10]);
    r.eval_return_mean = parse_cell(cells[11]);
    r.eval_return_std = parse_cell(cells[12]);
    r.mode_coverage = parse_cell(cells[13]);
    r.q_bias = parse_cell(cells[14]);
    return r;
}

struct MetricsWriter::Impl {
    std::ofstream os;
};

MetricsWriter::MetricsWriter(const std::string& path) : impl_(new Impl) {
    impl_->os.open(path);
    if (!impl_->os) {
        delete impl_;
        throw std::runtime_error("MetricsWriter: cannot open " + path);
    }
    impl_->os << kMetricsHeader << "\n";
}

MetricsWriter::~MetricsWriter() { delete impl_; }

void MetricsWriter::write(const MetricsRow& row) { impl_->os << metrics_row_to_csv(row) << "\n"; }

void MetricsWriter::flush() { impl_->os.flush(); }

std::vector<MetricsRow> load_metrics(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_metrics: cannot open " + path);
    std::string line;
    std::getline(is, line);
    if (line != kMetricsHeader) throw std::runtime_error("load_metrics: bad header in " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(is, line))
        if (!line.empty()) rows.push_back(metrics_row_from_csv(line));
    return rows;
}

}  // namespace gsflow
