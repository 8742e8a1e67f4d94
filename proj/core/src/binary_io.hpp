/*
 * Copyright 2026 The Empathy-LSTM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace empathy::io {

// Little-endian encoding of fixed-width values, independent of host order.
template <typename T>
void append_le(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.append(bytes, sizeof(T));
}

inline void append_doubles(std::string& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(values.data()),
               values.size() * sizeof(double));
  } else {
    for (double v : values) append_le(out, v);
  }
}

class Reader {
 public:
  Reader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  template <typename T>
  T read_le() {
    auto bytes = take(sizeof(T));
    char buffer[sizeof(T)];
    std::memcpy(buffer, bytes.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(buffer, buffer + sizeof(T));
    }
    T value;
    std::memcpy(&value, buffer, sizeof(T));
    return value;
  }

  void read_doubles(std::span<double> out) {
    auto bytes = take(out.size() * sizeof(double));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : out) {
        char* p = reinterpret_cast<char*>(&v);
        std::reverse(p, p + sizeof(double));
      }
    }
  }

  std::string_view take(std::size_t n);
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace empathy::io
