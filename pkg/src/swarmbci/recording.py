"""Continuous EEG recordings, NSR file I/O, and epoch extraction.

The NSR format is deliberately minimal so recordings round-trip
bit-exactly: an ASCII magic line, a one-line JSON header, then the raw
sample-major float32 payload (frame 0 all channels, frame 1 all
channels, ...). Amplitudes are in microvolts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"NSR1"

#: Command codes shared by markers, trials, and the swarm simulator.
EVENT_CODES = (1, 2, 3, 4)
EVENT_NAMES = {1: "Hovering", 2: "Splitting", 3: "Dispersing", 4: "Aggregating"}

# 64-electrode 10/20-extended layout used as the default channel set.
DEFAULT_64_CHANNELS = (
    "Fp1 Fp2 AF7 AF3 AFz AF4 AF8 F7 F5 F3 F1 Fz F2 F4 F6 F8 "
    "FT7 FC5 FC3 FC1 FC2 FC4 FC6 FT8 T7 C5 C3 C1 Cz C2 C4 C6 "
    "T8 TP7 CP5 CP3 CP1 CPz CP2 CP4 CP6 TP8 P7 P5 P3 P1 Pz P2 "
    "P4 P6 P8 PO7 PO5 PO3 POz PO4 PO6 PO8 O1 Oz O2 F9 F10 Iz"
).split()


class NsrFormatError(ValueError):
    """Raised when a file does not conform to the NSR format."""


@dataclass(frozen=True)
class ChannelLayout:
    """Ordered set of channel labels."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if len(set(names)) != len(names):
            raise ValueError("channel names must be unique")
        if not names:
            raise ValueError("layout must contain at least one channel")
        object.__setattr__(self, "names", names)

    @property
    def count(self) -> int:
        return len(self.names)

    @classmethod
    def default_64(cls) -> "ChannelLayout":
        return cls(tuple(DEFAULT_64_CHANNELS))

    @classmethod
    def generic(cls, n: int) -> "ChannelLayout":
        """Layout with placeholder names Ch01..ChNN."""
        return cls(tuple(f"Ch{i + 1:02d}" for i in range(n)))


@dataclass(frozen=True)
class EventMarker:
    """Imagery-phase onset marker.

    ``sample_index`` counts samples since recording start;
    ``event_code`` is the commanded behavior (1=Hovering, 2=Splitting,
    3=Dispersing, 4=Aggregating).
    """

    sample_index: int
    event_code: int

    def __post_init__(self):
        if self.sample_index < 0:
            raise ValueError(f"marker sample_index must be >= 0, got {self.sample_index}")
        if self.event_code not in EVENT_CODES:
            raise ValueError(f"event_code must be in {EVENT_CODES}, got {self.event_code}")


@dataclass(frozen=True)
class ParadigmTiming:
    """Per-trial phase durations in seconds (rest, cue, fixation, imagery)."""

    rest_s: float = 3.0
    cue_s: float = 3.0
    fixation_s: float = 3.0
    imagery_s: float = 4.0

    def __post_init__(self):
        for name in ("rest_s", "cue_s", "fixation_s", "imagery_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def trial_s(self) -> float:
        return self.rest_s + self.cue_s + self.fixation_s + self.imagery_s


@dataclass
class Recording:
    """Continuous multichannel recording with event markers.

    ``data`` is channels x samples, stored float32 so NSR round trips
    are bit-exact.
    """

    subject_id: str
    sampling_rate_hz: float
    layout: ChannelLayout
    data: np.ndarray
    markers: list[EventMarker] = field(default_factory=list)
    notch_applied_hz: float | None = None

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be positive")
        if self.data.ndim != 2:
            raise ValueError(f"data must be 2-D (channels x samples), got ndim={self.data.ndim}")
        if self.data.shape[0] != self.layout.count:
            raise ValueError(
                f"data has {self.data.shape[0]} rows but layout declares "
                f"{self.layout.count} channels"
            )
        self.markers = list(self.markers)
        for i, m in enumerate(self.markers):
            if m.sample_index >= self.n_samples:
                raise ValueError(
                    f"marker {i} out of range: sample_index {m.sample_index} "
                    f">= n_samples {self.n_samples}"
                )
        idx = [m.sample_index for m in self.markers]
        if idx != sorted(idx):
            raise ValueError("markers must be sorted ascending by sample_index")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.sampling_rate_hz == other.sampling_rate_hz
            and self.layout == other.layout
            and self.markers == other.markers
            and self.notch_applied_hz == other.notch_applied_hz
            and self.data.shape == other.data.shape
            and np.array_equal(
                self.data.view(np.uint32), other.data.view(np.uint32)
            )  # bit-exact, NaN-safe
        )


@dataclass(frozen=True)
class Trial:
    """One epoched imagery window (channels x T) with its class label."""

    label: int
    samples: np.ndarray

    def __post_init__(self):
        if self.label not in EVENT_CODES:
            raise ValueError(f"trial label must be in {EVENT_CODES}, got {self.label}")
        samples = np.asarray(self.samples)
        if samples.ndim != 2:
            raise ValueError("trial samples must be channels x T")
        object.__setattr__(self, "samples", samples)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class TrialSet:
    """Homogeneous collection of labeled trials."""

    trials: list[Trial]
    layout: ChannelLayout
    sampling_rate_hz: float

    def __post_init__(self):
        self.trials = list(self.trials)
        for t in self.trials:
            if t.n_channels != self.layout.count:
                raise ValueError("trial channel count does not match layout")
            if t.n_samples != self.trials[0].n_samples:
                raise ValueError("all trials must share the same length T")

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def labels(self) -> list[int]:
        return [t.label for t in self.trials]

    def subset(self, indices) -> "TrialSet":
        return TrialSet([self.trials[i] for i in indices], self.layout, self.sampling_rate_hz)


def save_recording(rec: Recording, path) -> None:
    """Write ``rec`` to ``path`` in NSR format.

    Invariants are re-validated before any byte is written.
    """
    if not isinstance(rec, Recording):
        raise TypeError("save_recording expects a Recording")
    # Re-run invariant checks in case fields were mutated after construction.
    Recording(
        rec.subject_id, rec.sampling_rate_hz, rec.layout, rec.data,
        rec.markers, rec.notch_applied_hz,
    )
    header = {
        "subject_id": rec.subject_id,
        "sampling_rate_hz": rec.sampling_rate_hz,
        "channels": list(rec.layout.names),
        "notch_hz": rec.notch_applied_hz,
        "markers": [[m.sample_index, m.event_code] for m in rec.markers],
        "n_samples": rec.n_samples,
    }
    payload = np.ascontiguousarray(rec.data.T, dtype="<f4")  # sample-major frames
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n")
        fh.write(payload.tobytes())


def load_recording(path) -> Recording:
    """Read an NSR file back into a :class:`Recording`."""
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != MAGIC:
            raise NsrFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        header_line = fh.readline()
        if not header_line:
            raise NsrFormatError(f"{path}: missing JSON header line")
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise NsrFormatError(f"{path}: malformed JSON header: {exc}") from exc
        payload = fh.read()

    try:
        subject_id = str(header["subject_id"])
        fs = float(header["sampling_rate_hz"])
        channels = [str(c) for c in header["channels"]]
        notch = header["notch_hz"]
        marker_pairs = header["markers"]
        n_samples = int(header["n_samples"])
    except (KeyError, TypeError, ValueError) as exc:
        raise NsrFormatError(f"{path}: malformed header: {exc}") from exc
    if notch is not None:
        notch = float(notch)

    n_channels = len(channels)
    expected = n_channels * n_samples * 4
    if len(payload) != expected:
        raise NsrFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"({n_channels} channels x {n_samples} samples x 4)"
        )
    frames = np.frombuffer(payload, dtype="<f4").reshape(n_samples, n_channels)
    data = np.ascontiguousarray(frames.T)

    markers = []
    for i, pair in enumerate(marker_pairs):
        try:
            sample_index, event_code = int(pair[0]), int(pair[1])
            marker = EventMarker(sample_index, event_code)
        except (TypeError, IndexError, ValueError) as exc:
            raise NsrFormatError(f"{path}: malformed marker {i}: {exc}") from exc
        if marker.sample_index >= n_samples:
            raise NsrFormatError(
                f"{path}: marker {i} out of range: sample_index "
                f"{marker.sample_index} >= n_samples {n_samples}"
            )
        markers.append(marker)

    try:
        return Recording(subject_id, fs, ChannelLayout(tuple(channels)), data, markers, notch)
    except ValueError as exc:
        raise NsrFormatError(f"{path}: {exc}") from exc


def extract_trials(rec: Recording, timing: ParadigmTiming = ParadigmTiming()) -> TrialSet:
    """Cut the imagery window after every marker into a labeled trial.

    Markers denote imagery onset; each trial is exactly
    ``imagery_s * sampling_rate_hz`` samples. Rest/cue/fixation segments
    are discarded. A recording without markers yields an empty TrialSet.
    """
    t_len = int(round(timing.imagery_s * rec.sampling_rate_hz))
    trials = []
    for i, m in enumerate(rec.markers):
        end = m.sample_index + t_len
        if end > rec.n_samples:
            raise ValueError(
                f"marker {i} window out of range: [{m.sample_index}, {end}) "
                f"exceeds n_samples {rec.n_samples}"
            )
        trials.append(Trial(m.event_code, rec.data[:, m.sample_index:end].copy()))
    return TrialSet(trials, rec.layout, rec.sampling_rate_hz)


def class_histogram(ts: TrialSet) -> dict[int, int]:
    """Trial count per event code (all four codes always present)."""
    counts = {code: 0 for code in EVENT_CODES}
    for t in ts.trials:
        counts[t.label] += 1
    return counts
