"""On-disk formats: binary tensors, measurements, schedules, parameter files.

Every binary format is a single line of JSON (sorted keys, '\\n'-terminated)
followed by a raw little-endian payload, so outputs are byte-reproducible.

TensorFile      header {"dtype":"f64","shape":[...],"layout":"row-major",
                "kind":"signal"|"image"}; payload 8 * prod(shape) bytes f64.
MeasurementFile header {"M","N","Q","delta","sigma","operator_seed",
                "noise_seed"}; payload 2 * M bytes of u16 codeword indices.
Schedule        plain JSON {"K","lambdas","betas","sigma"}.
Spectral file   header {"kind":"spectral","G","R","J","H","W","warmup"};
                payload f64 arrays delta, theta then complex arrays b, c
                (and u, v, alpha when R > 0) stored as interleaved
                (real, imag) f64 pairs.
DMB file        header {"kind":"dmb","C","state_dim","G","R","J","H","W",
                "w1","w2","warmup","ffb"}; payload field order: norm_scale,
                norm_shift, spatial a, b, c, d_skip, then the spectral
                payload above, then (if ffb) pw1, dw, pw2.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dmb import DMBParams, FFBKernels, SpatialSSMParams
from .exceptions import ConsistencyError, InputError
from .quantizer import QuantizerSpec
from .sensing import MeasurementRecord
from .spectral_op import LowRankCoupling, SpectralParams
from .unfold import StageSchedule

_F8 = np.dtype("<f8")
_C16 = np.dtype("<c16")
_U16 = np.dtype("<u2")


def _dump_header(header: dict) -> bytes:
    return (json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n").encode()


def _split_header(raw: bytes, path) -> tuple[dict, bytes]:
    newline = raw.find(b"\n")
    if newline < 0:
        raise InputError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise InputError(f"{path}: malformed JSON header ({err})")
    if not isinstance(header, dict):
        raise InputError(f"{path}: header is not a JSON object")
    return header, raw[newline + 1:]


# -- tensors ----------------------------------------------------------------

def write_tensor(path, values: np.ndarray, kind: str = "signal") -> None:
    values = np.asarray(values, dtype=float)
    header = {"dtype": "f64", "shape": list(values.shape),
              "layout": "row-major", "kind": kind}
    Path(path).write_bytes(_dump_header(header) + values.astype(_F8).tobytes())


def read_tensor(path) -> tuple[np.ndarray, str]:
    header, payload = _split_header(Path(path).read_bytes(), path)
    try:
        shape = tuple(int(s) for s in header["shape"])
        kind = header["kind"]
        if header["dtype"] != "f64" or header["layout"] != "row-major":
            raise InputError(f"{path}: unsupported dtype/layout")
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"{path}: bad tensor header ({err})")
    expected = 8 * int(np.prod(shape)) if shape else 8
    if len(payload) != expected:
        raise InputError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    return np.frombuffer(payload, dtype=_F8).reshape(shape).copy(), kind


# -- measurements -----------------------------------------------------------

def write_measurement(path, record: MeasurementRecord, n: int) -> None:
    header = {"M": int(record.indices.size), "N": int(n),
              "Q": record.spec.bits, "delta": record.spec.step,
              "sigma": record.sigma, "operator_seed": record.operator_seed,
              "noise_seed": record.noise_seed}
    payload = record.indices.astype(_U16).tobytes()
    Path(path).write_bytes(_dump_header(header) + payload)


def read_measurement(path) -> tuple[MeasurementRecord, int]:
    """Returns (record, signal length N)."""
    header, payload = _split_header(Path(path).read_bytes(), path)
    try:
        m, n, q = int(header["M"]), int(header["N"]), int(header["Q"])
        delta, sigma = float(header["delta"]), float(header["sigma"])
        op_seed, noise_seed = int(header["operator_seed"]), int(header["noise_seed"])
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"{path}: bad measurement header ({err})")
    if len(payload) != 2 * m:
        raise ConsistencyError(
            f"{path}: payload is {len(payload)} bytes, expected {2 * m}")
    indices = np.frombuffer(payload, dtype=_U16).astype(np.int64)
    if indices.size and indices.max() >= 2 ** q:
        raise ConsistencyError(f"{path}: codeword index out of range for Q={q}")
    spec = QuantizerSpec(bits=q, step=delta if q > 1 else 1.0)
    record = MeasurementRecord(indices=indices, spec=spec, sigma=sigma,
                               noise_seed=noise_seed, operator_seed=op_seed)
    return record, n


# -- schedules --------------------------------------------------------------

def write_schedule(path, schedule: StageSchedule) -> None:
    doc = {"K": schedule.stages, "lambdas": list(map(float, schedule.lambdas)),
           "betas": list(map(float, schedule.betas)), "sigma": schedule.sigma}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_schedule(path) -> StageSchedule:
    try:
        doc = json.loads(Path(path).read_text())
        schedule = StageSchedule(lambdas=np.asarray(doc["lambdas"], dtype=float),
                                 betas=np.asarray(doc["betas"], dtype=float),
                                 sigma=float(doc["sigma"]))
        if int(doc["K"]) != schedule.stages:
            raise ConsistencyError(f"{path}: K does not match array lengths")
    except ConsistencyError:
        raise
    except (OSError, KeyError, TypeError, ValueError,
            json.JSONDecodeError) as err:
        raise InputError(f"{path}: bad schedule file ({err})")
    return schedule


# -- parameter files --------------------------------------------------------

def _spectral_payload(spectral: SpectralParams,
                      coupling: LowRankCoupling | None) -> bytes:
    chunks = [spectral.delta.astype(_F8).tobytes(),
              spectral.theta.astype(_F8).tobytes(),
              spectral.b.astype(_C16).tobytes(),
              spectral.c.astype(_C16).tobytes()]
    if coupling is not None and coupling.rank > 0:
        chunks += [coupling.u.astype(_C16).tobytes(),
                   coupling.v.astype(_C16).tobytes(),
                   coupling.alpha.astype(_F8).tobytes()]
    return b"".join(chunks)


class _Cursor:
    def __init__(self, payload: bytes, path):
        self.payload, self.offset, self.path = payload, 0, path

    def take(self, shape, dtype) -> np.ndarray:
        count = int(np.prod(shape))
        nbytes = count * dtype.itemsize
        if self.offset + nbytes > len(self.payload):
            raise InputError(f"{self.path}: payload truncated")
        out = np.frombuffer(self.payload, dtype=dtype,
                            count=count, offset=self.offset)
        self.offset += nbytes
        return out.reshape(shape).copy()

    def done(self):
        if self.offset != len(self.payload):
            raise InputError(f"{self.path}: {len(self.payload) - self.offset} "
                             "trailing payload bytes")


def _read_spectral_payload(cur: _Cursor, groups, rank, steps, height, width,
                           warmup) -> tuple[SpectralParams, LowRankCoupling | None]:
    wf = width // 2 + 1
    shape = (groups, height, wf)
    spectral = SpectralParams(delta=cur.take(shape, _F8),
                              theta=cur.take(shape, _F8),
                              b=cur.take(shape, _C16),
                              c=cur.take(shape, _C16), steps=steps)
    coupling = None
    if rank > 0:
        bshape = (groups, rank, height * wf)
        coupling = LowRankCoupling(u=cur.take(bshape, _C16),
                                   v=cur.take(bshape, _C16),
                                   alpha=cur.take((groups,), _F8),
                                   warmup=warmup)
    return spectral, coupling


def write_spectral_params(path, spectral: SpectralParams,
                          coupling: LowRankCoupling | None,
                          height: int, width: int) -> None:
    rank = coupling.rank if coupling is not None else 0
    header = {"kind": "spectral", "G": spectral.groups, "R": rank,
              "J": spectral.steps, "H": height, "W": width,
              "warmup": coupling.warmup if coupling is not None else 1.0}
    Path(path).write_bytes(_dump_header(header)
                           + _spectral_payload(spectral, coupling))


def read_spectral_params(path) -> tuple[SpectralParams, LowRankCoupling | None]:
    header, payload = _split_header(Path(path).read_bytes(), path)
    try:
        if header["kind"] != "spectral":
            raise InputError(f"{path}: not a spectral parameter file")
        groups, rank, steps = int(header["G"]), int(header["R"]), int(header["J"])
        height, width = int(header["H"]), int(header["W"])
        warmup = float(header["warmup"])
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"{path}: bad spectral header ({err})")
    cur = _Cursor(payload, path)
    spectral, coupling = _read_spectral_payload(
        cur, groups, rank, steps, height, width, warmup)
    cur.done()
    return spectral, coupling


def write_dmb_params(path, params: DMBParams, height: int, width: int) -> None:
    channels = params.norm_scale.shape[0]
    rank = params.coupling.rank if params.coupling is not None else 0
    header = {"kind": "dmb", "C": channels,
              "state_dim": params.spatial.a.shape[0],
              "G": params.spectral.groups, "R": rank, "J": params.spectral.steps,
              "H": height, "W": width, "w1": params.w1, "w2": params.w2,
              "warmup": params.coupling.warmup if params.coupling else 1.0,
              "ffb": params.ffb is not None}
    chunks = [params.norm_scale.astype(_F8).tobytes(),
              params.norm_shift.astype(_F8).tobytes(),
              params.spatial.a.astype(_F8).tobytes(),
              params.spatial.b.astype(_F8).tobytes(),
              params.spatial.c.astype(_F8).tobytes(),
              params.spatial.d_skip.astype(_F8).tobytes(),
              _spectral_payload(params.spectral, params.coupling)]
    if params.ffb is not None:
        chunks += [params.ffb.pw1.astype(_F8).tobytes(),
                   params.ffb.dw.astype(_F8).tobytes(),
                   params.ffb.pw2.astype(_F8).tobytes()]
    Path(path).write_bytes(_dump_header(header) + b"".join(chunks))


def read_dmb_params(path) -> tuple[DMBParams, int, int]:
    """Returns (params, H, W) — the grid the spectral filter was built for."""
    header, payload = _split_header(Path(path).read_bytes(), path)
    try:
        if header["kind"] != "dmb":
            raise InputError(f"{path}: not a DMB parameter file")
        channels, state_dim = int(header["C"]), int(header["state_dim"])
        groups, rank, steps = int(header["G"]), int(header["R"]), int(header["J"])
        height, width = int(header["H"]), int(header["W"])
        w1, w2 = float(header["w1"]), float(header["w2"])
        warmup, has_ffb = float(header["warmup"]), bool(header["ffb"])
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"{path}: bad DMB header ({err})")
    cur = _Cursor(payload, path)
    norm_scale = cur.take((channels,), _F8)
    norm_shift = cur.take((channels,), _F8)
    spatial = SpatialSSMParams(a=cur.take((state_dim, state_dim), _F8),
                               b=cur.take((state_dim, channels), _F8),
                               c=cur.take((channels, state_dim), _F8),
                               d_skip=cur.take((channels,), _F8))
    spectral, coupling = _read_spectral_payload(
        cur, groups, rank, steps, height, width, warmup)
    ffb = None
    if has_ffb:
        ffb = FFBKernels(pw1=cur.take((channels, channels), _F8),
                         dw=cur.take((channels, 3, 3), _F8),
                         pw2=cur.take((channels, channels), _F8))
    cur.done()
    params = DMBParams(w1=w1, w2=w2, norm_scale=norm_scale,
                       norm_shift=norm_shift, spatial=spatial,
                       spectral=spectral, coupling=coupling, ffb=ffb)
    return params, height, width


# -- PGM export -------------------------------------------------------------

def write_pgm(path, image: np.ndarray) -> None:
    """8-bit binary PGM of a 2D image; values clipped to [0, 1]."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 3:
        image = image.mean(axis=-1)
    if image.ndim != 2:
        raise InputError(f"PGM export needs a 2D image, got ndim={image.ndim}")
    levels = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + levels.tobytes())
