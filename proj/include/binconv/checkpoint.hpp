#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "binconv/model.hpp"

namespace binconv {

inline constexpr int kCheckpointFormatVersion = 1;

// Thrown for unreadable, inconsistent or incompatible checkpoints.
class CheckpointError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
	std::uint64_t seed = 0;
	std::size_t epoch = 0;
};

// Writes <dir>/manifest.json and <dir>/params.bin (little-endian float32 in
// manifest order). Output depends only on the parameters and metadata.
void save_checkpoint(const BinConvModel<float>& model, const std::filesystem::path& dir,
                     const CheckpointMeta& meta = {});

// Rebuilds the model described by the manifest and fills in its parameters.
BinConvModel<float> load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta = nullptr);

// Loads parameters into an existing model; every tensor name and shape must match.
void load_parameters(BinConvModel<float>& model, const std::filesystem::path& dir);

} // namespace binconv
