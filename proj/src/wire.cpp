#include "rdquant/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "rdquant/error.hpp"

namespace rdq {

namespace {

constexpr std::uint8_t kGradientMagic[4] = {'G', 'R', 'D', 'V'};
constexpr std::uint8_t kEncodedMagic[4] = {'G', 'R', 'D', 'Q'};

class Writer {
 public:
  void bytes(const std::uint8_t* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      out_.push_back(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  // Packs width-bit fields LSB first, zero-padding the last byte.
  void packed(std::span<const std::uint32_t> values, int width) {
    std::uint64_t acc = 0;
    int filled = 0;
    for (std::uint32_t v : values) {
      acc |= static_cast<std::uint64_t>(v) << filled;
      filled += width;
      while (filled >= 8) {
        out_.push_back(static_cast<std::uint8_t>(acc));
        acc >>= 8;
        filled -= 8;
      }
    }
    if (filled > 0) out_.push_back(static_cast<std::uint8_t>(acc));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated ") + what, in_.size());
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::uint64_t varint(const char* what) {
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    for (int shift = 0;; shift += 7) {
      if (shift > 63) throw FormatError(std::string("overlong varint in ") + what, start);
      const std::uint8_t b = u8(what);
      const std::uint64_t bits = b & 0x7f;
      if (shift == 63 && bits > 1) throw FormatError(std::string("varint overflow in ") + what, start);
      v |= bits << shift;
      if (!(b & 0x80)) break;
    }
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_magic(const std::uint8_t (&magic)[4]) {
    need(4, "magic");
    for (int i = 0; i < 4; ++i) {
      if (in_[pos_ + i] != magic[i]) throw FormatError("bad magic", pos_ + i);
    }
    pos_ += 4;
  }
  void expect_end() const {
    if (pos_ != in_.size()) throw FormatError("trailing bytes", pos_);
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint64_t read_length(Reader& r) {
  const std::size_t at = r.offset();
  const std::uint64_t d = r.u64("length");
  if (d < 1 || d > kMaxGradientLength) throw FormatError("length out of range", at);
  return d;
}

void read_version(Reader& r) {
  const std::size_t at = r.offset();
  if (r.u8("version") != kWireVersion) throw FormatError("unsupported version", at);
}

// A bitmap of n bits with zero padding; returns its bits.
std::vector<std::uint8_t> read_bitmap(Reader& r, std::uint64_t n, const char* what) {
  const std::size_t start = r.offset();
  const auto bytes = r.take(static_cast<std::size_t>((n + 7) / 8), what);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) bits[i] = (bytes[i / 8] >> (i % 8)) & 1u;
  if (n % 8 != 0 && (bytes.back() >> (n % 8)) != 0) {
    throw FormatError(std::string("non-zero padding in ") + what, start + bytes.size() - 1);
  }
  return bits;
}

void write_bitmap(Writer& w, const std::vector<std::uint8_t>& bits) {
  std::vector<std::uint32_t> v(bits.begin(), bits.end());
  w.packed(v, 1);
}

}  // namespace

std::vector<std::uint8_t> write_gradient(const GradientVector& u) {
  validate_gradient(u);
  Writer w;
  w.bytes(kGradientMagic, 4);
  w.u8(kWireVersion);
  w.u64(static_cast<std::uint64_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) w.f32(static_cast<float>(u(i)));
  return w.take();
}

GradientVector read_gradient(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kGradientMagic);
  read_version(r);
  const std::uint64_t d = read_length(r);
  r.need(static_cast<std::size_t>(d) * 4, "values");
  GradientVector u(static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < d; ++i) {
    const std::size_t at = r.offset();
    const float v = r.f32("values");
    if (!std::isfinite(v)) throw FormatError("non-finite value", at);
    u(static_cast<Eigen::Index>(i)) = v;
  }
  r.expect_end();
  return u;
}

WireTag wire_tag(const EncodedGradient& enc) {
  switch (enc.payload.index()) {
    case 0:
      return WireTag::ScaledSign;
    case 1:
      return WireTag::SparseBbit;
    default:
      return WireTag::Ternary;
  }
}

std::vector<std::uint8_t> write_encoded(const EncodedGradient& enc) {
  validate_encoded(enc);
  Writer w;
  w.bytes(kEncodedMagic, 4);
  w.u8(kWireVersion);
  w.u8(static_cast<std::uint8_t>(wire_tag(enc)));
  w.u64(enc.length);
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ScaledSignPayload>) {
          w.f32(p.scale);
          write_bitmap(w, p.positive);
        } else if constexpr (std::is_same_v<P, SparsePayload>) {
          const std::uint64_t k = p.indices.size();
          w.u64(k);
          w.u8(static_cast<std::uint8_t>(p.bits));
          w.f32(p.lo);
          w.f32(p.hi);
          if (k * 16 > enc.length) {
            w.u8(0);
            std::vector<std::uint8_t> support(static_cast<std::size_t>(enc.length), 0);
            for (std::uint64_t i : p.indices) support[i] = 1;
            write_bitmap(w, support);
          } else {
            w.u8(1);
            std::uint64_t prev = 0;
            for (std::size_t i = 0; i < p.indices.size(); ++i) {
              w.varint(i == 0 ? p.indices[i] : p.indices[i] - prev - 1);
              prev = p.indices[i];
            }
          }
          w.packed(p.codes, p.bits);
        } else {
          w.f32(p.scale);
          std::vector<std::uint32_t> groups;
          groups.reserve(p.symbols.size() / 5 + 1);
          for (std::size_t i = 0; i < p.symbols.size(); i += 5) {
            std::uint32_t byte = 0;
            std::uint32_t place = 1;
            for (std::size_t j = i; j < std::min(i + 5, p.symbols.size()); ++j, place *= 3) {
              const std::int8_t s = p.symbols[j];
              byte += place * static_cast<std::uint32_t>(s == 0 ? 0 : (s > 0 ? 1 : 2));
            }
            groups.push_back(byte);
          }
          w.packed(groups, 8);
        }
      },
      enc.payload);
  return w.take();
}

EncodedGradient read_encoded(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kEncodedMagic);
  read_version(r);
  const std::size_t tag_at = r.offset();
  const std::uint8_t tag = r.u8("tag");
  EncodedGradient enc;
  enc.length = read_length(r);
  const std::uint64_t d = enc.length;

  switch (static_cast<WireTag>(tag)) {
    case WireTag::ScaledSign: {
      ScaledSignPayload p;
      const std::size_t at = r.offset();
      p.scale = r.f32("scale");
      if (!(p.scale >= 0.0f) || !std::isfinite(p.scale)) throw FormatError("bad scale", at);
      p.positive = read_bitmap(r, d, "sign bitmap");
      enc.payload = std::move(p);
      break;
    }
    case WireTag::SparseBbit: {
      SparsePayload p;
      std::size_t at = r.offset();
      const std::uint64_t k = r.u64("K");
      if (k > d) throw FormatError("K exceeds d", at);
      at = r.offset();
      p.bits = r.u8("b");
      if (p.bits < 2 || p.bits > 32) throw FormatError("bit width out of range", at);
      at = r.offset();
      p.lo = r.f32("lo");
      p.hi = r.f32("hi");
      if (p.bits == 32 ? (p.lo != 0.0f || p.hi != 0.0f)
                       : (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.lo >= 0.0f) || !(p.hi >= p.lo))) {
        throw FormatError("bad value grid", at);
      }
      at = r.offset();
      const std::uint8_t mode = r.u8("index mode");
      if (mode != (k * 16 > d ? 0 : 1)) throw FormatError("non-canonical index mode", at);
      if (mode == 0) {
        const std::size_t map_at = r.offset();
        const std::vector<std::uint8_t> support = read_bitmap(r, d, "support bitmap");
        for (std::uint64_t i = 0; i < d; ++i) {
          if (support[i]) p.indices.push_back(i);
        }
        if (p.indices.size() != k) throw FormatError("support bitmap disagrees with K", map_at);
      } else {
        // Each gap takes at least one byte, so K is bounded by the input.
        r.need(static_cast<std::size_t>(k), "index list");
        p.indices.reserve(static_cast<std::size_t>(k));
        std::uint64_t next = 0;
        for (std::uint64_t i = 0; i < k; ++i) {
          at = r.offset();
          const std::uint64_t gap = r.varint("index list");
          if (gap >= d || next + gap >= d) throw FormatError("index out of bounds", at);
          p.indices.push_back(next + gap);
          next = next + gap + 1;
        }
      }
      const std::size_t codes_at = r.offset();
      const std::uint64_t code_bits = k * static_cast<std::uint64_t>(p.bits);
      const auto packed = r.take(static_cast<std::size_t>((code_bits + 7) / 8), "values");
      p.codes.resize(static_cast<std::size_t>(k));
      const std::uint64_t mask = (std::uint64_t{1} << p.bits) - 1;
      for (std::uint64_t i = 0; i < k; ++i) {
        const std::uint64_t first = i * static_cast<std::uint64_t>(p.bits);
        std::uint64_t v = 0;
        for (std::uint64_t bit = 0; bit < static_cast<std::uint64_t>(p.bits); ++bit) {
          const std::uint64_t pos = first + bit;
          v |= static_cast<std::uint64_t>((packed[pos / 8] >> (pos % 8)) & 1u) << bit;
        }
        p.codes[i] = static_cast<std::uint32_t>(v & mask);
        if (p.bits == 32 && !std::isfinite(std::bit_cast<float>(p.codes[i]))) {
          throw FormatError("non-finite value", codes_at + static_cast<std::size_t>(first / 8));
        }
      }
      if (code_bits % 8 != 0 && (packed.back() >> (code_bits % 8)) != 0) {
        throw FormatError("non-zero padding in values", codes_at + packed.size() - 1);
      }
      enc.payload = std::move(p);
      break;
    }
    case WireTag::Ternary: {
      TernaryPayload p;
      const std::size_t at = r.offset();
      p.scale = r.f32("scale");
      if (!(p.scale >= 0.0f) || !std::isfinite(p.scale)) throw FormatError("bad scale", at);
      const std::size_t groups_at = r.offset();
      const auto groups = r.take(static_cast<std::size_t>((d + 4) / 5), "ternary symbols");
      p.symbols.resize(static_cast<std::size_t>(d));
      for (std::size_t g = 0; g < groups.size(); ++g) {
        std::uint32_t byte = groups[g];
        const std::size_t count = std::min<std::size_t>(5, static_cast<std::size_t>(d) - 5 * g);
        std::uint32_t limit = 1;
        for (std::size_t j = 0; j < count; ++j) limit *= 3;
        if (byte >= limit) throw FormatError("bad ternary group", groups_at + g);
        for (std::size_t j = 0; j < count; ++j, byte /= 3) {
          const std::uint32_t digit = byte % 3;
          p.symbols[5 * g + j] = digit == 0 ? 0 : (digit == 1 ? 1 : -1);
        }
      }
      enc.payload = std::move(p);
      break;
    }
    default:
      throw FormatError("unknown scheme tag", tag_at);
  }
  r.expect_end();
  return enc;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace rdq
