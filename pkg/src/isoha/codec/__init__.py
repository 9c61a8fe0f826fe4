"""ASCII ISO 8583 codec with interchangeable C and pure-Python kernels.

The hot scanning loops live in ``_speedups`` (Cython) with a line-for-line
twin in ``_pure``.  Selection happens at import time; set ISOHA_PURE_PYTHON
to force the fallback.  ``kernel_backend()`` reports which one won.
"""

from .fields import (
    CompiledTable,
    ContentClass,
    DictionaryError,
    FieldDictionary,
    FieldFormat,
    FieldSpec,
    default_dictionary,
    load_dictionary,
    parse_dictionary,
)
from .message import (
    APPROVED_RESPONSE_CODE,
    ECHO_REQUEST_MTI,
    ECHO_RESPONSE_MTI,
    NETWORK_MGMT_ECHO_CODE,
    STANDARD,
    BitmapError,
    CodecError,
    EncodeError,
    IsoMessage,
    Mti,
    Verdict,
    VerdictReason,
    build_echo_request,
    classify,
    decode_bitmap,
    decode_message,
    encode_bitmap,
    encode_message,
    kernel_backend,
    next_stan,
    response_mti,
)

__all__ = [
    "APPROVED_RESPONSE_CODE",
    "BitmapError",
    "CodecError",
    "CompiledTable",
    "ContentClass",
    "DictionaryError",
    "ECHO_REQUEST_MTI",
    "ECHO_RESPONSE_MTI",
    "EncodeError",
    "FieldDictionary",
    "FieldFormat",
    "FieldSpec",
    "IsoMessage",
    "Mti",
    "NETWORK_MGMT_ECHO_CODE",
    "STANDARD",
    "Verdict",
    "VerdictReason",
    "build_echo_request",
    "classify",
    "decode_bitmap",
    "decode_message",
    "default_dictionary",
    "encode_bitmap",
    "encode_message",
    "kernel_backend",
    "load_dictionary",
    "next_stan",
    "parse_dictionary",
    "response_mti",
]
