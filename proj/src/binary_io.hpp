// sanm/binary_io.hpp

// Copyright 2026  The sanm authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Internal little-endian stream helpers for the checkpoint and corpus
// containers. Reads carry a byte offset so parse errors can name the exact
// position; this code assumes a little-endian host.

#ifndef SANM_SRC_BINARY_IO_HPP_
#define SANM_SRC_BINARY_IO_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "sanm/tensor.hpp"

namespace sanm {
namespace io {

inline void write_raw(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& out, uint32_t v) { write_raw(out, &v, 4); }

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  write_raw(out, s.data(), s.size());
}

class Reader {
 public:
  Reader(std::istream& in, std::string context)
      : in_(in), context_(std::move(context)) {}

  long long offset() const { return offset_; }

  void bytes(void* dst, size_t n, const std::string& what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n) {
      throw DataError(context_ + ": truncated " + what + " at byte offset " +
                      std::to_string(offset_));
    }
    offset_ += static_cast<long long>(n);
  }

  uint32_t u32(const std::string& what) {
    uint32_t v = 0;
    bytes(&v, 4, what);
    return v;
  }

  std::string str(const std::string& what) {
    const uint32_t n = u32(what + " length");
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n, what);
    return s;
  }

  void expect_magic(const std::string& magic, const std::string& kind) {
    std::string got(magic.size(), '\0');
    bytes(got.data(), magic.size(), kind + " magic");
    if (got != magic) {
      throw DataError(context_ + ": not a " + kind + " file (bad magic at byte offset 0)");
    }
  }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::istream& in_;
  std::string context_;
  long long offset_ = 0;
};

}  // namespace io
}  // namespace sanm

#endif  // SANM_SRC_BINARY_IO_HPP_
