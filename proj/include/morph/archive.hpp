#pragma once

// Named-tensor archive used for checkpoints and extractor weight import.
//
//   MORPHARCHIVE 1
//   meta <key> <value>                       (zero or more)
//   tensor <name> <f32|f64> <rank> <d0> .. <offset> <nbytes>   (zero or more)
//   data <total-bytes>
//   <raw little-endian IEEE-754 bytes; offsets are relative to this point>
//
// Header lines end with '\n'; names and meta values contain no whitespace.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "morph/nn.hpp"

MORPH_BEGIN_NAMESPACE

class ArchiveError : public std::runtime_error {
 public:
  ArchiveError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct Archive {
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  const std::string& meta_at(const std::string& key) const;
};

std::string serialize_archive(const Archive& archive);
// Values stored as f32 or f64 are converted to the build's Real.
Archive parse_archive(const std::string& bytes);

void save_archive(const Archive& archive, const std::string& path);
Archive load_archive(const std::string& path);

MORPH_END_NAMESPACE
