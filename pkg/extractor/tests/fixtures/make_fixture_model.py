"""Regenerate tiny_encoder.onnx, the test encoder for the extractor.

Mimics the framing of self-supervised speech encoders (conv kernel 400,
stride 320 at 16 kHz -> one vector per 20 ms) at toy size, with two
"layers" exposed as separate outputs so --layer selection is testable:

    waveform (1, samples) f32
      -> Unsqueeze -> Conv(k=400, s=320) -> Relu -> transpose  = hidden_states.0
                                         -> Conv(k=1) -> transpose = hidden_states.1

Weights are seeded random, never trained; tests only need determinism
and the right framing. The ONNX protobuf is emitted directly with
struct-style packing so regeneration needs nothing beyond numpy.

    python make_fixture_model.py [out.onnx]
"""

import sys

import numpy as np

DIM = 16
KERNEL = 400
STRIDE = 320

# protobuf wire types
_VARINT, _LEN = 0, 2


def _varint(value):
    out = b""
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out += bytes([byte | 0x80])
        else:
            return out + bytes([byte])


def _tag(field, wire):
    return _varint((field << 3) | wire)


def field_varint(field, value):
    return _tag(field, _VARINT) + _varint(value)


def field_bytes(field, payload):
    return _tag(field, _LEN) + _varint(len(payload)) + payload


def field_string(field, text):
    return field_bytes(field, text.encode())


def tensor_proto(name, array):
    array = np.ascontiguousarray(array, dtype=np.float32)
    msg = b"".join(field_varint(1, d) for d in array.shape)
    msg += field_varint(2, 1)  # data_type = FLOAT
    msg += field_string(8, name)
    msg += field_bytes(9, array.tobytes())  # raw_data
    return msg


def int64_tensor_proto(name, values):
    msg = field_varint(1, len(values))
    msg += field_varint(2, 7)  # data_type = INT64
    msg += field_string(8, name)
    msg += field_bytes(9, np.asarray(values, dtype="<i8").tobytes())
    return msg


def attr_ints(name, values):
    msg = field_string(1, name)
    msg += b"".join(field_varint(8, v) for v in values)
    msg += field_varint(20, 7)  # AttributeType = INTS
    return msg


def node(op_type, inputs, outputs, name, attrs=()):
    msg = b"".join(field_string(1, i) for i in inputs)
    msg += b"".join(field_string(2, o) for o in outputs)
    msg += field_string(3, name)
    msg += field_string(4, op_type)
    msg += b"".join(field_bytes(5, a) for a in attrs)
    return msg


def value_info(name, dims):
    """dims entries: int -> fixed size, str -> symbolic dimension."""
    shape = b""
    for d in dims:
        dim = field_string(2, d) if isinstance(d, str) else field_varint(1, d)
        shape += field_bytes(1, dim)
    tensor_type = field_varint(1, 1) + field_bytes(2, shape)  # elem_type FLOAT
    type_proto = field_bytes(1, tensor_type)
    return field_string(1, name) + field_bytes(2, type_proto)


def _weights():
    rng = np.random.default_rng(12345)
    w0 = (rng.standard_normal((DIM, 1, KERNEL)) / np.sqrt(KERNEL)).astype(np.float32)
    b0 = (0.1 * rng.standard_normal(DIM)).astype(np.float32)
    w1 = (rng.standard_normal((DIM, DIM, 1)) / np.sqrt(DIM)).astype(np.float32)
    b1 = (0.1 * rng.standard_normal(DIM)).astype(np.float32)
    return w0, b0, w1, b1


def build_model():
    w0, b0, w1, b1 = _weights()

    nodes = [
        node("Unsqueeze", ["waveform", "axes1"], ["wav3d"], "unsqueeze"),
        node(
            "Conv",
            ["wav3d", "w0", "b0"],
            ["conv0"],
            "frontend",
            attrs=[attr_ints("kernel_shape", [KERNEL]), attr_ints("strides", [STRIDE])],
        ),
        node("Relu", ["conv0"], ["act0"], "act"),
        node(
            "Conv",
            ["act0", "w1", "b1"],
            ["conv1"],
            "layer1",
            attrs=[attr_ints("kernel_shape", [1]), attr_ints("strides", [1])],
        ),
        node("Transpose", ["act0"], ["hidden_states.0"], "out0",
             attrs=[attr_ints("perm", [0, 2, 1])]),
        node("Transpose", ["conv1"], ["hidden_states.1"], "out1",
             attrs=[attr_ints("perm", [0, 2, 1])]),
    ]
    initializers = [
        tensor_proto("w0", w0),
        tensor_proto("b0", b0),
        tensor_proto("w1", w1),
        tensor_proto("b1", b1),
        int64_tensor_proto("axes1", [1]),
    ]

    graph = b"".join(field_bytes(1, n) for n in nodes)
    graph += field_string(2, "tiny_encoder")
    graph += b"".join(field_bytes(5, t) for t in initializers)
    graph += field_bytes(11, value_info("waveform", [1, "samples"]))
    graph += field_bytes(12, value_info("hidden_states.0", [1, "frames", DIM]))
    graph += field_bytes(12, value_info("hidden_states.1", [1, "frames", DIM]))

    opset = field_string(1, "") + field_varint(2, 13)
    model = field_varint(1, 8)  # ir_version 8
    model += field_string(2, "tiny-encoder-fixture")
    model += field_bytes(7, graph)
    model += field_bytes(8, opset)
    return model


def reference_features(samples, layer=1):
    """Numpy mirror of the graph, the oracle for extractor tests."""
    w0, b0, w1, b1 = _weights()
    x = np.asarray(samples, dtype=np.float32)
    frames = 1 + (len(x) - KERNEL) // STRIDE
    h0 = np.empty((frames, DIM), dtype=np.float32)
    for t in range(frames):
        seg = x[t * STRIDE : t * STRIDE + KERNEL]
        h0[t] = w0[:, 0, :] @ seg + b0
    h0 = np.maximum(h0, 0.0)
    if layer == 0:
        return h0
    return h0 @ w1[:, :, 0].T + b1


def test_signal(n=16000, freq=220.0, rate=16000):
    """The deterministic waveform the extractor tests feed the model."""
    i = np.arange(n, dtype=np.float64)
    return (0.5 * np.sin(2.0 * np.pi * freq * i / rate)).astype(np.float32)


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "tiny_encoder.onnx"
    with open(out, "wb") as fh:
        fh.write(build_model())
    print(f"wrote {out}")
    sig = test_signal()
    for layer in (0, 1):
        ref = reference_features(sig, layer=layer)
        path = f"expected_layer{layer}.f32"
        ref.astype("<f4").tofile(path)
        print(f"wrote {path} ({ref.shape[0]} x {ref.shape[1]})")
