#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "metasched/ats/trainer.hpp"

namespace metasched::harness {

inline constexpr int kRecordSchemaVersion = 1;

// Line-delimited records; the first line is a schema header carrying the
// version, subsequent lines hold one episode each.
void write_records(std::ostream& os, std::span<const ats::EpisodeRecord> records);
void write_records_file(const std::filesystem::path& path,
                        std::span<const ats::EpisodeRecord> records);

std::vector<ats::EpisodeRecord> read_records(std::istream& is);
std::vector<ats::EpisodeRecord> read_records_file(const std::filesystem::path& path);

}  // namespace metasched::harness
