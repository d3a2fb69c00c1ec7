// Copyright 2026 The iclb Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "iclb/attack.hpp"
#include "iclb/backend.hpp"
#include "iclb/config.hpp"
#include "iclb/context.hpp"
#include "iclb/corpus.hpp"
#include "iclb/defense.hpp"
#include "iclb/error.hpp"
#include "iclb/evaluator.hpp"
#include "iclb/mock_backend.hpp"
#include "iclb/presets.hpp"
#include "iclb/remote_backend.hpp"
