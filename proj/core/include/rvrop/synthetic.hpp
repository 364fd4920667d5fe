#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rvrop/image.hpp"
#include "rvrop/scanner.hpp"

namespace rvrop::synth {

struct PlantedGadget {
  std::string label;
  Addr entry = 0;
  std::optional<scan::RoleKind> role;  // empty for gadgets with no expected role
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::vector<std::string> listing;
  bool unintended = false;
};

struct ImageManifest {
  std::vector<PlantedGadget> planted;
  std::vector<std::pair<Addr, Word>> constants;
  std::vector<std::pair<std::string, Addr>> stubs;

  const PlantedGadget* find(std::string_view label) const;
  std::optional<Addr> stub(std::string_view name) const;

  /// `label entry a b role unintended` per planted gadget, then
  /// `CONST addr value` and `STUB name addr` lines.
  std::string to_text() const;
  static ImageManifest parse(std::string_view text);
};

struct SynthConfig {
  Addr text_base = 0x10000;
  Addr rodata_base = 0x20000;
  Word constant = 0x00c0ffee5eed1e55ull;
};

struct SynthImage {
  image::MemoryImage image;
  ImageManifest manifest;
};

/// Assembles the fixture image. Throws `AssemblyFailure` if a planted
/// listing cannot be encoded.
SynthImage build_image(const SynthConfig& cfg = {});

}  // namespace rvrop::synth
