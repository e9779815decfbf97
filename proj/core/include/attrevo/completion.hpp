#pragma once

#include <cstdint>
#include <string>

namespace attrevo {

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.7;
  std::uint64_t seed = 0;
  int max_tokens = 512;
};

/// Text-in/text-out language model. Must be shareable across threads.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

}  // namespace attrevo
