#include "naturalcl/buffer.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>

namespace naturalcl {

ReplayBuffer::ReplayBuffer(std::uint64_t seed) : seed_(seed), rng_(seed) {}

void ReplayBuffer::init_class(int stream, std::vector<std::size_t> sample_indices, int intro_phase) {
    if (contains(stream)) {
        throw std::invalid_argument("stream " + std::to_string(stream) + " already in replay buffer");
    }
    if (sample_indices.empty()) {
        throw std::invalid_argument("stream " + std::to_string(stream) + " has no samples");
    }
    std::sort(sample_indices.begin(), sample_indices.end());
    if (std::adjacent_find(sample_indices.begin(), sample_indices.end()) != sample_indices.end()) {
        throw std::invalid_argument("stream " + std::to_string(stream) + " has repeated sample indices");
    }
    streams_.emplace(stream, Stream{std::move(sample_indices), intro_phase});
}

const ReplayBuffer::Stream& ReplayBuffer::stream(int id) const {
    const auto it = streams_.find(id);
    if (it == streams_.end()) throw std::invalid_argument("unknown buffer stream " + std::to_string(id));
    return it->second;
}

void ReplayBuffer::shrink_to(int stream_id, std::size_t k) {
    const auto it = streams_.find(stream_id);
    if (it == streams_.end()) throw std::invalid_argument("unknown buffer stream " + std::to_string(stream_id));
    auto& indices = it->second.indices;
    if (k > indices.size()) {
        throw std::invalid_argument("cannot grow stream " + std::to_string(stream_id) + " from " +
                                    std::to_string(indices.size()) + " to " + std::to_string(k));
    }
    if (k == indices.size()) return;

    // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, indices.size() - 1);
        std::swap(indices[i], indices[pick(rng_)]);
    }
    indices.resize(k);
    std::sort(indices.begin(), indices.end());
}

const std::vector<std::size_t>& ReplayBuffer::retained(int stream_id) const { return stream(stream_id).indices; }

int ReplayBuffer::intro_phase(int stream_id) const { return stream(stream_id).intro_phase; }

std::vector<int> ReplayBuffer::streams() const {
    std::vector<int> ids;
    ids.reserve(streams_.size());
    for (const auto& [id, _] : streams_) ids.push_back(id);
    return ids;
}

void ReplayBuffer::record_phase(int phase) {
    for (const auto& [id, s] : streams_) audit_.push_back({id, phase, s.indices.size()});
}

void ReplayBuffer::write_audit_csv(std::ostream& out) const {
    out << "class_id,phase,retained_count\n";
    for (const auto& row : audit_) out << row.stream << ',' << row.phase << ',' << row.retained << '\n';
}

int StreamGroups::group_of(int stream) const {
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (std::find(groups[g].begin(), groups[g].end(), stream) != groups[g].end()) {
            return static_cast<int>(g) + 1;
        }
    }
    throw std::invalid_argument("stream " + std::to_string(stream) + " belongs to no group");
}

std::size_t StreamGroups::per_stream_count(const PhasePlan& plan, int phase, int group) const {
    const auto& members = groups.at(static_cast<std::size_t>(group - 1));
    if (members.empty()) throw std::invalid_argument("empty stream group");
    return static_cast<std::size_t>(plan.count(phase, group)) / members.size();
}

void shrink_to_plan(ReplayBuffer& buffer, int phase, const PhasePlan& plan, const StreamGroups& layout) {
    for (int g = 1; g <= plan.groups(); ++g) {
        if (plan.intro_phase(g) >= phase) continue;
        const std::size_t share = layout.per_stream_count(plan, phase, g);
        for (int stream : layout.groups.at(static_cast<std::size_t>(g - 1))) buffer.shrink_to(stream, share);
    }
}

std::vector<TrainingSample> training_multiset(const ReplayBuffer& buffer, int phase, const PhasePlan& plan,
                                              const StreamGroups& layout) {
    if (static_cast<int>(layout.groups.size()) != plan.groups()) {
        throw std::logic_error("stream layout has " + std::to_string(layout.groups.size()) + " groups, plan has " +
                               std::to_string(plan.groups()));
    }
    std::vector<int> active;
    for (int g = 1; g <= plan.groups(); ++g) {
        if (plan.intro_phase(g) > phase) continue;
        const std::size_t share = layout.per_stream_count(plan, phase, g);
        for (int stream : layout.groups[g - 1]) {
            const std::size_t have = buffer.retained(stream).size();
            if (have != share) {
                throw std::logic_error("stream " + std::to_string(stream) + " holds " + std::to_string(have) +
                                       " samples but the plan allots " + std::to_string(share) + " in phase " +
                                       std::to_string(phase));
            }
            active.push_back(stream);
        }
    }
    std::sort(active.begin(), active.end());

    std::vector<TrainingSample> samples;
    for (int stream : active) {
        for (std::size_t index : buffer.retained(stream)) samples.push_back({index, stream});
    }
    return samples;
}

}  // namespace naturalcl
