// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace kie {

/// Directed edge between two fields of one document.
struct Edge {
    int from = 0;
    int to = 0;

    bool operator==(const Edge&) const = default;
};

}  // namespace kie
