// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/validator/nifti.hpp"

#include "neuroflow/common/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace neuroflow::validator {

namespace {

// Field offsets of the NIfTI-1 header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffMagic = 344;

template <typename T>
T byteswap_value(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), &v, sizeof(T));
  std::reverse(raw.begin(), raw.end());
  std::memcpy(&v, raw.data(), sizeof(T));
  return v;
}

constexpr bool kHostLittle = std::endian::native == std::endian::little;

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, Endianness e) : bytes_(bytes), swap_(needs_swap(e)) {}

  template <typename T>
  T get(std::size_t offset) const {
    T v;
    std::memcpy(&v, bytes_.data() + offset, sizeof(T));
    return swap_ ? byteswap_value(v) : v;
  }

  template <std::size_t N>
  std::array<char, N> chars(std::size_t offset) const {
    std::array<char, N> out{};
    std::memcpy(out.data(), bytes_.data() + offset, N);
    return out;
  }

  template <typename T, std::size_t N>
  std::array<T, N> array(std::size_t offset) const {
    std::array<T, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = get<T>(offset + i * sizeof(T));
    return out;
  }

  static bool needs_swap(Endianness e) { return (e == Endianness::LITTLE) != kHostLittle; }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class Writer {
 public:
  explicit Writer(Endianness e) : buf_(kNifti1HeaderSize, 0), swap_(Reader::needs_swap(e)) {}

  template <typename T>
  void put(std::size_t offset, T v) {
    if (swap_) v = byteswap_value(v);
    std::memcpy(buf_.data() + offset, &v, sizeof(T));
  }

  template <std::size_t N>
  void chars(std::size_t offset, const std::array<char, N>& a) {
    std::memcpy(buf_.data() + offset, a.data(), N);
  }

  template <typename T, std::size_t N>
  void array(std::size_t offset, const std::array<T, N>& a) {
    for (std::size_t i = 0; i < N; ++i) put<T>(offset + i * sizeof(T), a[i]);
  }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
  bool swap_;
};

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip_prefix(std::span<const std::uint8_t> bytes, std::size_t want) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw NiftiError(NiftiErrorKind::GZIP_CORRUPT, "gzip: cannot initialise inflater");
  std::vector<std::uint8_t> out(want);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(want);
  int rc = Z_OK;
  while (zs.avail_out > 0 && rc == Z_OK) rc = inflate(&zs, Z_NO_FLUSH);
  const std::size_t produced = want - zs.avail_out;
  inflateEnd(&zs);
  if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR)
    throw NiftiError(NiftiErrorKind::GZIP_CORRUPT, "gzip: corrupt stream");
  out.resize(produced);
  return out;
}

}  // namespace

int bitpix_for_datatype(int datatype) {
  switch (datatype) {
    case 2: return 8;       // uint8
    case 4: return 16;      // int16
    case 8: return 32;      // int32
    case 16: return 32;     // float32
    case 32: return 64;     // complex64
    case 64: return 64;     // float64
    case 128: return 24;    // rgb24
    case 256: return 8;     // int8
    case 512: return 16;    // uint16
    case 768: return 32;    // uint32
    case 1024: return 64;   // int64
    case 1280: return 64;   // uint64
    case 1536: return 128;  // float128
    case 1792: return 128;  // complex128
    case 2048: return 256;  // complex256
    case 2304: return 32;   // rgba32
    default: return 0;
  }
}

NiftiHeader parse_nifti_header(std::span<const std::uint8_t> input) {
  std::vector<std::uint8_t> inflated;
  std::span<const std::uint8_t> bytes = input;
  if (is_gzip(input)) {
    inflated = gunzip_prefix(input, kNifti1HeaderSize);
    bytes = inflated;
  }
  if (bytes.size() < kNifti1HeaderSize)
    throw NiftiError(NiftiErrorKind::SHORT_HEADER,
                     "short header: " + std::to_string(bytes.size()) + " of 348 bytes");

  const auto le = Reader(bytes, Endianness::LITTLE).get<std::int32_t>(0);
  const auto be = Reader(bytes, Endianness::BIG).get<std::int32_t>(0);
  Endianness endian;
  if (le == static_cast<std::int32_t>(kNifti1HeaderSize))
    endian = Endianness::LITTLE;
  else if (be == static_cast<std::int32_t>(kNifti1HeaderSize))
    endian = Endianness::BIG;
  else if (le == kNifti2HeaderSize || be == kNifti2HeaderSize)
    throw NiftiError(NiftiErrorKind::NIFTI2_UNSUPPORTED, "NIfTI-2 unsupported");
  else
    throw NiftiError(NiftiErrorKind::NOT_NIFTI1, "not a NIfTI-1 header");

  const Reader r(bytes, endian);
  NiftiHeader h;
  h.endianness = endian;
  h.sizeof_hdr = r.get<std::int32_t>(0);
  h.data_type = r.chars<10>(4);
  h.db_name = r.chars<18>(14);
  h.extents = r.get<std::int32_t>(32);
  h.session_error = r.get<std::int16_t>(36);
  h.regular = static_cast<char>(bytes[38]);
  h.dim_info = static_cast<char>(bytes[39]);
  h.dim = r.array<std::int16_t, 8>(kOffDim);
  h.intent_p1 = r.get<float>(56);
  h.intent_p2 = r.get<float>(60);
  h.intent_p3 = r.get<float>(64);
  h.intent_code = r.get<std::int16_t>(68);
  h.datatype = r.get<std::int16_t>(kOffDatatype);
  h.bitpix = r.get<std::int16_t>(kOffBitpix);
  h.slice_start = r.get<std::int16_t>(74);
  h.pixdim = r.array<float, 8>(kOffPixdim);
  h.vox_offset = r.get<float>(kOffVoxOffset);
  h.scl_slope = r.get<float>(112);
  h.scl_inter = r.get<float>(116);
  h.slice_end = r.get<std::int16_t>(120);
  h.slice_code = static_cast<char>(bytes[122]);
  h.xyzt_units = static_cast<char>(bytes[123]);
  h.cal_max = r.get<float>(124);
  h.cal_min = r.get<float>(128);
  h.slice_duration = r.get<float>(132);
  h.toffset = r.get<float>(136);
  h.glmax = r.get<std::int32_t>(140);
  h.glmin = r.get<std::int32_t>(144);
  h.descrip = r.chars<80>(148);
  h.aux_file = r.chars<24>(228);
  h.qform_code = r.get<std::int16_t>(252);
  h.sform_code = r.get<std::int16_t>(254);
  h.quatern_b = r.get<float>(256);
  h.quatern_c = r.get<float>(260);
  h.quatern_d = r.get<float>(264);
  h.qoffset_x = r.get<float>(268);
  h.qoffset_y = r.get<float>(272);
  h.qoffset_z = r.get<float>(276);
  h.srow_x = r.array<float, 4>(280);
  h.srow_y = r.array<float, 4>(296);
  h.srow_z = r.array<float, 4>(312);
  h.intent_name = r.chars<16>(328);
  h.magic = r.chars<4>(kOffMagic);

  if (h.dim[0] < 1 || h.dim[0] > 7)
    throw NiftiError(NiftiErrorKind::BAD_DIM,
                     "dim[0]=" + std::to_string(h.dim[0]) + " outside 1..7");
  for (int i = 1; i <= h.dim[0]; ++i)
    if (h.dim[i] < 1)
      throw NiftiError(NiftiErrorKind::BAD_DIM,
                       "dim[" + std::to_string(i) + "]=" + std::to_string(h.dim[i]) + " < 1");
  const bool magic_ok = (h.magic == std::array<char, 4>{'n', '+', '1', '\0'}) ||
                        (h.magic == std::array<char, 4>{'n', 'i', '1', '\0'});
  if (!magic_ok) throw NiftiError(NiftiErrorKind::BAD_MAGIC, "bad magic string");
  const int expected_bitpix = bitpix_for_datatype(h.datatype);
  if (expected_bitpix == 0 || expected_bitpix != h.bitpix)
    throw NiftiError(NiftiErrorKind::BITPIX_MISMATCH,
                     "bitpix " + std::to_string(h.bitpix) + " inconsistent with datatype " +
                         std::to_string(h.datatype));
  return h;
}

std::vector<std::uint8_t> serialize_header(const NiftiHeader& h) {
  Writer w(h.endianness);
  w.put<std::int32_t>(0, h.sizeof_hdr);
  w.chars(4, h.data_type);
  w.chars(14, h.db_name);
  w.put<std::int32_t>(32, h.extents);
  w.put<std::int16_t>(36, h.session_error);
  w.put<char>(38, h.regular);
  w.put<char>(39, h.dim_info);
  w.array(kOffDim, h.dim);
  w.put<float>(56, h.intent_p1);
  w.put<float>(60, h.intent_p2);
  w.put<float>(64, h.intent_p3);
  w.put<std::int16_t>(68, h.intent_code);
  w.put<std::int16_t>(kOffDatatype, h.datatype);
  w.put<std::int16_t>(kOffBitpix, h.bitpix);
  w.put<std::int16_t>(74, h.slice_start);
  w.array(kOffPixdim, h.pixdim);
  w.put<float>(kOffVoxOffset, h.vox_offset);
  w.put<float>(112, h.scl_slope);
  w.put<float>(116, h.scl_inter);
  w.put<std::int16_t>(120, h.slice_end);
  w.put<char>(122, h.slice_code);
  w.put<char>(123, h.xyzt_units);
  w.put<float>(124, h.cal_max);
  w.put<float>(128, h.cal_min);
  w.put<float>(132, h.slice_duration);
  w.put<float>(136, h.toffset);
  w.put<std::int32_t>(140, h.glmax);
  w.put<std::int32_t>(144, h.glmin);
  w.chars(148, h.descrip);
  w.chars(228, h.aux_file);
  w.put<std::int16_t>(252, h.qform_code);
  w.put<std::int16_t>(254, h.sform_code);
  w.put<float>(256, h.quatern_b);
  w.put<float>(260, h.quatern_c);
  w.put<float>(264, h.quatern_d);
  w.put<float>(268, h.qoffset_x);
  w.put<float>(272, h.qoffset_y);
  w.put<float>(276, h.qoffset_z);
  w.array(280, h.srow_x);
  w.array(296, h.srow_y);
  w.array(312, h.srow_z);
  w.chars(328, h.intent_name);
  w.chars(kOffMagic, h.magic);
  return w.take();
}

NiftiHeader read_nifti_header(const std::filesystem::path& path) {
  // Enough compressed bytes for any realistic deflate of a 348-byte header.
  auto bytes = read_bytes(path, 64 * 1024);
  return parse_nifti_header(bytes);
}

NiftiHeader make_float32_header(std::span<const int> shape) {
  if (shape.empty() || shape.size() > 7)
    throw NiftiError(NiftiErrorKind::BAD_DIM, "volume must have 1 to 7 dimensions");
  NiftiHeader h;
  h.dim[0] = static_cast<std::int16_t>(shape.size());
  for (std::size_t i = 0; i < 7; ++i) {
    h.dim[i + 1] = static_cast<std::int16_t>(i < shape.size() ? shape[i] : 1);
    h.pixdim[i + 1] = 1.0f;
  }
  h.pixdim[0] = 1.0f;
  h.datatype = 16;
  h.bitpix = 32;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.xyzt_units = 10;  // mm + seconds
  h.sform_code = 1;
  h.srow_x = {1, 0, 0, 0};
  h.srow_y = {0, 1, 0, 0};
  h.srow_z = {0, 0, 1, 0};
  return h;
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw IoError("gzip: cannot initialise deflater");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = out.size() - zs.avail_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("gzip: compression failed");
  out.resize(produced);
  return out;
}

void write_nifti(const std::filesystem::path& path, const NiftiHeader& header,
                 std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> bytes = serialize_header(header);
  bytes.resize(bytes.size() + 4, 0);  // empty extension block
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  if (path.extension() == ".gz") bytes = gzip_compress(bytes);
  write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace neuroflow::validator
