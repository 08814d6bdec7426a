#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <vector>

#include "naturalcl/schedule.hpp"

namespace naturalcl {

/// One entry of a phase's training data: a row of the source dataset and the
/// buffer stream it belongs to (a class id in Class-IL, a task id in Domain-IL).
struct TrainingSample {
    std::size_t index;
    int stream;

    friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

struct BufferAuditRow {
    int stream;
    int phase;
    std::size_t retained;
};

/// Retained sample indices per stream. Streams only ever shrink: every
/// shrink keeps a uniformly random subset of what was retained before, drawn
/// with the buffer's own seeded generator.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::uint64_t seed);

    /// Registers a stream with all of its sample indices. Throws
    /// std::invalid_argument on a duplicate stream, an empty index list or
    /// repeated indices.
    void init_class(int stream, std::vector<std::size_t> sample_indices, int intro_phase);

    /// Keeps a uniformly random k-subset (without replacement) of the stream.
    void shrink_to(int stream, std::size_t k);

    [[nodiscard]] bool contains(int stream) const { return streams_.count(stream) != 0; }
    [[nodiscard]] const std::vector<std::size_t>& retained(int stream) const;
    [[nodiscard]] int intro_phase(int stream) const;
    [[nodiscard]] std::vector<int> streams() const;
    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    /// Appends the current size of every stream to the audit log.
    void record_phase(int phase);
    [[nodiscard]] const std::vector<BufferAuditRow>& audit() const { return audit_; }

    /// `class_id,phase,retained_count`, one row per recorded stream and phase.
    void write_audit_csv(std::ostream& out) const;

private:
    struct Stream {
        std::vector<std::size_t> indices;  // ascending
        int intro_phase;
    };

    const Stream& stream(int id) const;

    std::uint64_t seed_;
    std::mt19937_64 rng_;
    std::map<int, Stream> streams_;
    std::vector<BufferAuditRow> audit_;
};

/// Maps buffer streams onto plan groups: `groups[g - 1]` lists the streams of
/// plan group g. Counts divide evenly across a group's streams, floored.
struct StreamGroups {
    std::vector<std::vector<int>> groups;

    [[nodiscard]] int group_of(int stream) const;  // 1-based, throws if absent
    [[nodiscard]] std::size_t per_stream_count(const PhasePlan& plan, int phase, int group) const;
};

/// Shrinks every stream introduced before `phase` to its plan share.
void shrink_to_plan(ReplayBuffer& buffer, int phase, const PhasePlan& plan, const StreamGroups& layout);

/// All retained indices of streams introduced at or before `phase`, in
/// ascending stream order. Throws std::logic_error when a stream's size
/// differs from its plan share, i.e. the buffer was not shrunk first.
std::vector<TrainingSample> training_multiset(const ReplayBuffer& buffer, int phase, const PhasePlan& plan,
                                              const StreamGroups& layout);

}  // namespace naturalcl
