/*
 * Copyright 2026 The dispclutter Authors
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

#ifndef DISPCLUTTER_DISPCLUTTER_HPP
#define DISPCLUTTER_DISPCLUTTER_HPP

#include "dispclutter/core.hpp"
#include "dispclutter/rng.hpp"
#include "dispclutter/relaxation_field.hpp"
#include "dispclutter/dielectric.hpp"
#include "dispclutter/propagation.hpp"
#include "dispclutter/covariance.hpp"
#include "dispclutter/spectral_metrics.hpp"
#include "dispclutter/modal_analysis.hpp"
#include "dispclutter/config.hpp"
#include "dispclutter/experiment.hpp"
#include "dispclutter/report.hpp"

#endif  // DISPCLUTTER_DISPCLUTTER_HPP
