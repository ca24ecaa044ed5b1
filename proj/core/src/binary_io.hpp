#ifndef UAI_SRC_BINARY_IO_HPP_
#define UAI_SRC_BINARY_IO_HPP_

// Little-endian primitive encoding shared by the binary formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include "uai/error.hpp"

namespace uai::detail {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
T ToLittle(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4,
                                                    std::uint32_t,
                                                    std::uint8_t>>;
    U u;
    std::memcpy(&u, &v, sizeof u);
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      r = static_cast<U>((r << 8) | ((u >> (8 * i)) & 0xffU));
    }
    std::memcpy(&v, &r, sizeof v);
  }
  return v;
}

class ByteWriter {
 public:
  template <typename T>
  void Put(T v) {
    static_assert(std::is_arithmetic_v<T>);
    v = ToLittle(v);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void PutRaw(std::string_view s) { bytes_.append(s); }

  const std::string& bytes() const { return bytes_; }
  std::string Take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T Get() {
    static_assert(std::is_arithmetic_v<T>);
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return ToLittle(v);
  }

  std::string_view GetRaw(std::size_t n) {
    Need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void ExpectEnd() const {
    if (remaining() != 0) {
      throw IoError(what_ + ": " + std::to_string(remaining()) +
                    " unexpected trailing bytes");
    }
  }

  void Need(std::size_t n) const {
    if (n > remaining()) {
      throw IoError(what_ + ": truncated at byte " + std::to_string(pos_) +
                    " (needed " + std::to_string(n) + ", have " +
                    std::to_string(remaining()) + ")");
    }
  }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace uai::detail

#endif  // UAI_SRC_BINARY_IO_HPP_
