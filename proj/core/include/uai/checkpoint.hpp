#ifndef UAI_CHECKPOINT_HPP_
#define UAI_CHECKPOINT_HPP_

// "UAI1" checkpoint: config, parameters, optimizer state and loss history.
// Byte layout (all little-endian) is documented in docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "uai/model.hpp"

namespace uai {

inline constexpr char kCheckpointMagic[4] = {'U', 'A', 'I', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string SaveCheckpoint(const UaiModel& model);
// Throws IoError on bad magic, version, truncation, trailing bytes or any
// shape that disagrees with the stored config. Nothing is returned on error.
UaiModel LoadCheckpoint(std::string_view bytes);

void SaveCheckpointFile(const UaiModel& model, const std::filesystem::path& path);
UaiModel LoadCheckpointFile(const std::filesystem::path& path);

}  // namespace uai

#endif  // UAI_CHECKPOINT_HPP_
