#pragma once

#include <cstddef>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "errsense/events.hpp"

namespace errsense {

/// A source stream handed to merge_streams was not time-ordered.
class StreamOrderError : public std::runtime_error {
public:
    StreamOrderError(std::size_t stream, std::size_t offset)
        : std::runtime_error("stream " + std::to_string(stream) + " regresses at offset " +
                             std::to_string(offset)),
          stream_(stream),
          offset_(offset) {}

    std::size_t stream_index() const { return stream_; }
    std::size_t offset() const { return offset_; }

private:
    std::size_t stream_;
    std::size_t offset_;
};

/// K-way merge of per-modality event streams into one timeline.
///
/// Each input stream must be non-decreasing in time.  Across streams, ties
/// are broken by payload priority (status < au < utterance < ...), then by
/// stream index; within one stream the original order is always kept.  For
/// the intended use -- one modality per stream -- this yields the canonical
/// deterministic timeline.
inline std::vector<EventEnvelope> merge_streams(std::vector<std::vector<EventEnvelope>> streams) {
    struct HeadRef {
        Timestamp t;
        int prio;
        std::size_t stream;
        std::size_t offset;
    };
    struct Later {
        bool operator()(const HeadRef& a, const HeadRef& b) const {
            if (a.t != b.t) return b.t < a.t;
            if (a.prio != b.prio) return b.prio < a.prio;
            if (a.stream != b.stream) return b.stream < a.stream;
            return b.offset < a.offset;
        }
    };

    std::size_t total = 0;
    std::priority_queue<HeadRef, std::vector<HeadRef>, Later> heads;
    for (std::size_t s = 0; s < streams.size(); ++s) {
        total += streams[s].size();
        if (!streams[s].empty())
            heads.push({streams[s][0].t, stream_priority(streams[s][0]), s, 0});
    }

    std::vector<EventEnvelope> out;
    out.reserve(total);
    while (!heads.empty()) {
        HeadRef h = heads.top();
        heads.pop();
        out.push_back(std::move(streams[h.stream][h.offset]));
        std::size_t next = h.offset + 1;
        if (next < streams[h.stream].size()) {
            const EventEnvelope& e = streams[h.stream][next];
            if (e.t < h.t) throw StreamOrderError(h.stream, next);
            heads.push({e.t, stream_priority(e), h.stream, next});
        }
    }
    return out;
}

}  // namespace errsense
