// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/error.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace neuroflow::validator {

inline constexpr std::size_t kNifti1HeaderSize = 348;
inline constexpr std::int32_t kNifti2HeaderSize = 540;

enum class Endianness { LITTLE, BIG };

/// Every field of the fixed 348-byte NIfTI-1 header, in file order.
struct NiftiHeader {
  std::int32_t sizeof_hdr = 348;
  std::array<char, 10> data_type{};
  std::array<char, 18> db_name{};
  std::int32_t extents = 0;
  std::int16_t session_error = 0;
  char regular = 0;
  char dim_info = 0;
  std::array<std::int16_t, 8> dim{};
  float intent_p1 = 0, intent_p2 = 0, intent_p3 = 0;
  std::int16_t intent_code = 0;
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::int16_t slice_start = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 0;
  float scl_slope = 0, scl_inter = 0;
  std::int16_t slice_end = 0;
  char slice_code = 0;
  char xyzt_units = 0;
  float cal_max = 0, cal_min = 0;
  float slice_duration = 0;
  float toffset = 0;
  std::int32_t glmax = 0, glmin = 0;
  std::array<char, 80> descrip{};
  std::array<char, 24> aux_file{};
  std::int16_t qform_code = 0, sform_code = 0;
  float quatern_b = 0, quatern_c = 0, quatern_d = 0;
  float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
  std::array<float, 4> srow_x{}, srow_y{}, srow_z{};
  std::array<char, 16> intent_name{};
  std::array<char, 4> magic{'n', '+', '1', '\0'};

  Endianness endianness = Endianness::LITTLE;

  int ndim() const { return dim[0]; }
};

enum class NiftiErrorKind {
  SHORT_HEADER,
  NOT_NIFTI1,
  NIFTI2_UNSUPPORTED,
  BAD_DIM,
  BAD_MAGIC,
  BITPIX_MISMATCH,
  GZIP_CORRUPT,
};

class NiftiError : public Error {
 public:
  NiftiError(NiftiErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  NiftiErrorKind kind() const { return kind_; }

 private:
  NiftiErrorKind kind_;
};

/// Bits per voxel implied by a NIfTI datatype code, or 0 for unknown codes.
int bitpix_for_datatype(int datatype);

/// Decode a header. Gzip input (1f 8b) is inflated first. Endianness is detected from
/// sizeof_hdr; all invariants are checked and violations raise NiftiError.
NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes);

/// Encode all fields in the header's own endianness; always exactly 348 bytes.
std::vector<std::uint8_t> serialize_header(const NiftiHeader& header);

/// Reads only the header bytes (inflating .gz transparently).
NiftiHeader read_nifti_header(const std::filesystem::path& path);

/// Minimal valid header for a float32 volume of the given shape (1 to 7 dims).
NiftiHeader make_float32_header(std::span<const int> shape);

/// Writes header + 4-byte extension pad + payload. A ".gz" suffix produces gzip output.
void write_nifti(const std::filesystem::path& path, const NiftiHeader& header,
                 std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);

}  // namespace neuroflow::validator
