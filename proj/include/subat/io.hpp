#pragma once

// On-disk artifacts. Binary files are little-endian: "SBAT", a kind byte and
// a version byte, then the payload. Readers demand the exact payload length.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "subat/netcore.hpp"
#include "subat/subspace.hpp"
#include "subat/trainer.hpp"

namespace subat::io {

enum class FileKind : std::uint8_t { kCheckpoint = 1, kTrajectory = 2, kBasis = 3 };
inline constexpr std::uint8_t kFormatVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParamVector& params);
std::vector<std::uint8_t> encode_trajectory(const Trajectory& trajectory);
std::vector<std::uint8_t> encode_basis(const SubspaceBasis& basis);

ParamVector decode_checkpoint(std::span<const std::uint8_t> bytes);
Trajectory decode_trajectory(std::span<const std::uint8_t> bytes);
SubspaceBasis decode_basis(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const ParamVector& params);
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);
void write_basis(const std::filesystem::path& path, const SubspaceBasis& basis);

ParamVector read_checkpoint(const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);
SubspaceBasis read_basis(const std::filesystem::path& path);

inline constexpr const char* kMetricsHeader =
    "epoch,step,lr,nat_train_acc,nat_val_acc,rob_train_acc,rob_val_acc,batch_grad_norm,"
    "avg_sample_grad_norm";

std::string format_metrics(std::span<const MetricsRecord> metrics);
std::vector<MetricsRecord> parse_metrics(const std::string& text);
void write_metrics(const std::filesystem::path& path, std::span<const MetricsRecord> metrics);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

// Whole-file helpers; writes go to a sibling temp file and are renamed.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace subat::io
