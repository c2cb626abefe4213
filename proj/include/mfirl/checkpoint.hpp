#pragma once
// Training checkpoints: one JSON file holding everything a run mutates
// (network weights, Adam moments, RNG stream positions, iteration counter)
// plus the config echo for provenance. Doubles round-trip exactly, so a
// resumed run continues bit for bit like the uninterrupted one.

#include <string>

#include "mfirl/mfairl.hpp"
#include "mfirl/pemmfirl.hpp"

namespace mfirl::checkpoint {

void save_pemmfirl(const pemmfirl::PemmfirlState& st, const std::string& config_echo,
                   const std::string& path);
// Restores into a state freshly constructed from the same (env, config);
// throws when the file's shapes do not match that construction.
void load_pemmfirl(pemmfirl::PemmfirlState& st, const std::string& path);

void save_airl(const airl::AirlState& st, const std::string& config_echo,
               const std::string& path);
void load_airl(airl::AirlState& st, const std::string& path);

// Provenance peeks that do not need a constructed state.
std::string saved_kind(const std::string& path);  // "pemmfirl" or "mfairl"
std::string saved_config_echo(const std::string& path);
int saved_iteration(const std::string& path);

}  // namespace mfirl::checkpoint
