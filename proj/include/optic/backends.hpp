// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>

#include "optic/backend_types.hpp"
#include "optic/result.hpp"

namespace optic {

/// A chat model. Used for both the text grounder and the visual grounder.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Result<ChatReply, BackendError> chat(const ChatRequest& request) = 0;
};

/// An open-vocabulary detector.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual Result<DetectionResponse, BackendError> detect(const DetectionRequest& request) = 0;
};

/// The three model roles the pipeline talks to. Any member may be null when
/// the selected mode does not use it.
struct BackendRoles {
  std::shared_ptr<ChatBackend> text_grounder;
  std::shared_ptr<DetectorBackend> detector;
  std::shared_ptr<ChatBackend> visual_grounder;
};

}  // namespace optic
