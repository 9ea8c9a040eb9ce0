#pragma once

#include <memory>
#include <string>

#include "gsflow/trainer.hpp"

namespace gsflow {

/// Binary checkpoint: magic "GSFC", u32 format version, then length-prefixed
/// named sections (config as canonical text, parameter arrays as f64
/// little-endian with a shape prefix, optimizer state, RNG stream states as
/// opaque bytes, the online replay buffer ring, and phase progress).
/// load(save(x)) restores training bit-identically on one platform.
void save_checkpoint(const std::string& path, const Trainer& trainer);

/// Rebuilds a Trainer from the stored config and restores all state. The
/// offline dataset is reloaded from cfg.dataset_path unless `load_dataset`
/// is false.
std::unique_ptr<Trainer> load_checkpoint(const std::string& path, bool load_dataset = true);

/// Restores checkpoint state into an existing trainer whose architecture
/// keys (hidden_dim, latent_dim) match; used to resume under a modified
/// schedule (more steps, different temperature target, ...).
void restore_checkpoint_state(const std::string& path, Trainer& trainer);

/// Reads just the embedded config text.
TrainConfig checkpoint_config(const std::string& path);

}  // namespace gsflow
