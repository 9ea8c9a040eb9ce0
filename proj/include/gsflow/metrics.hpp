#pragma once

#include <optional>
#include <string>
#include <vector>

namespace gsflow {

/// One logging-interval row. Fields a variant does not touch stay unset and
/// serialize as empty cells.
struct MetricsRow {
    long step = 0;
    std::string phase;  // "offline" | "online"
    std::optional<double> critic_loss, cfm_loss, vae_recon, vae_kl;
    std::optional<double> actor_total, distill, q_term, entropy, alpha2;
    std::optional<double> eval_return_mean, eval_return_std, mode_coverage, q_bias;
};

extern const char* kMetricsHeader;

std::string metrics_row_to_csv(const MetricsRow& row);
MetricsRow metrics_row_from_csv(const std::string& line);

/// Streaming CSV writer, header written on open.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);
    ~MetricsWriter();
    void write(const MetricsRow& row);
    void flush();

private:
    struct Impl;
    Impl* impl_;
};

std::vector<MetricsRow> load_metrics(const std::string& path);

}  // namespace gsflow
