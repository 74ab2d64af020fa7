"""Independent rule evaluator for cross-status thread filtering.

Written separately from the production filter, directly from the rules:
a thread counts only when both statuses speak; the initiator is kept; a
reply is kept when its author's status differs from the status label of
the message it replies to, or when it @-mentions someone whose status
differs from the author's at that moment.  Reply targets follow the
flat-thread convention: the latest earlier message by a mentioned earlier
participant, else the immediately preceding message.
"""

from __future__ import annotations


def elite_at(dev, t, intervals) -> bool:
    for span in intervals.get(dev, []):
        if span.start <= t and t < span.end:
            return True
    return False


def oracle_filter(thread, intervals):
    msgs = thread.messages
    labels = ["E" if elite_at(m.author, m.timestamp, intervals) else "N" for m in msgs]
    if "E" not in labels or "N" not in labels:
        return None
    keep = []
    for i, msg in enumerate(msgs):
        if i == 0:
            keep.append((msg, labels[i]))
            continue
        parent = i - 1
        mentioned_earlier = [j for j in range(i) if msgs[j].author in msg.mentions]
        if mentioned_earlier:
            parent = max(mentioned_earlier)
        if labels[i] != labels[parent]:
            keep.append((msg, labels[i]))
            continue
        exception = False
        for dev in msg.mentions:
            if elite_at(dev, msg.timestamp, intervals) != (labels[i] == "E"):
                exception = True
        if exception:
            keep.append((msg, labels[i]))
    return keep
