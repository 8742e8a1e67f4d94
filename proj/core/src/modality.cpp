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

#include "empathy/modality.hpp"

#include "empathy/errors.hpp"

namespace empathy {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::audio: return "audio";
    case Modality::text: return "text";
    case Modality::visual: return "visual";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  for (auto m : kAllModalities) {
    if (to_string(m) == name) return m;
  }
  throw DataError("unknown modality '" + std::string(name) +
                  "' (expected audio, text or visual)");
}

std::size_t default_input_dim(Modality m) {
  switch (m) {
    case Modality::audio: return 990;   // openSMILE emobase
    case Modality::text: return 300;    // GloVe
    case Modality::visual: return 4096; // VGG-Face fc layer
  }
  return 0;
}

}  // namespace empathy
