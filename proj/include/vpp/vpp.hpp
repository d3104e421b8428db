// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "vpp/alignment.hpp"
#include "vpp/augmentation.hpp"
#include "vpp/cli.hpp"
#include "vpp/domain.hpp"
#include "vpp/evaluation.hpp"
#include "vpp/image.hpp"
#include "vpp/localization.hpp"
#include "vpp/morphology.hpp"
#include "vpp/orchestrator.hpp"
#include "vpp/providers.hpp"
#include "vpp/remote.hpp"
#include "vpp/service.hpp"
#include "vpp/storage.hpp"
#include "vpp/stub_scenario.hpp"
#include "vpp/workspace.hpp"
