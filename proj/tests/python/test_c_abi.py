# SPDX-License-Identifier: Apache-2.0

"""Drives libfactrie_c through ctypes the way a Python model host would.

Usage: test_c_abi.py LIBRARY CLI DATA_DIR WORK_DIR
"""

import ctypes
import json
import math
import os
import shutil
import struct
import subprocess
import sys
import unittest

LIB, CLI, DATA, WORK = sys.argv[1:5]
del sys.argv[1:5]

LOGITS_FN = ctypes.CFUNCTYPE(ctypes.c_int, ctypes.c_void_p, ctypes.POINTER(ctypes.c_uint32), ctypes.c_size_t,
                             ctypes.POINTER(ctypes.c_float), ctypes.c_size_t)


def load_library(path):
    lib = ctypes.CDLL(path)
    lib.factrie_last_error.restype = ctypes.c_char_p
    lib.factrie_error_name.restype = ctypes.c_char_p
    lib.factrie_error_name.argtypes = [ctypes.c_int]
    lib.factrie_string_free.argtypes = [ctypes.c_void_p]
    lib.factrie_engine_open.restype = ctypes.c_void_p
    lib.factrie_engine_open.argtypes = [ctypes.c_char_p, ctypes.c_char_p]
    lib.factrie_engine_close.argtypes = [ctypes.c_void_p]
    lib.factrie_vocab_size.restype = ctypes.c_size_t
    lib.factrie_vocab_size.argtypes = [ctypes.c_void_p]
    lib.factrie_fingerprint.restype = ctypes.c_char_p
    lib.factrie_fingerprint.argtypes = [ctypes.c_void_p]
    lib.factrie_eos_token.restype = ctypes.c_uint32
    lib.factrie_encode.argtypes = [ctypes.c_void_p, ctypes.c_char_p, ctypes.POINTER(ctypes.c_uint32),
                                   ctypes.c_size_t, ctypes.POINTER(ctypes.c_size_t)]
    lib.factrie_decode.restype = ctypes.c_void_p
    lib.factrie_decode.argtypes = [ctypes.c_void_p, ctypes.POINTER(ctypes.c_uint32), ctypes.c_size_t]
    lib.factrie_session_create.restype = ctypes.c_void_p
    lib.factrie_session_create.argtypes = [ctypes.c_void_p]
    lib.factrie_session_fork.restype = ctypes.c_void_p
    lib.factrie_session_fork.argtypes = [ctypes.c_void_p]
    lib.factrie_session_free.argtypes = [ctypes.c_void_p]
    lib.factrie_session_is_constrained.argtypes = [ctypes.c_void_p]
    lib.factrie_session_mask.argtypes = [ctypes.c_void_p, ctypes.POINTER(ctypes.c_float), ctypes.c_size_t]
    lib.factrie_session_allowed.argtypes = [ctypes.c_void_p, ctypes.POINTER(ctypes.c_uint32),
                                            ctypes.POINTER(ctypes.c_uint64), ctypes.c_size_t,
                                            ctypes.POINTER(ctypes.c_size_t)]
    lib.factrie_session_step.argtypes = [ctypes.c_void_p, ctypes.c_uint32]
    lib.factrie_session_report_json.restype = ctypes.c_void_p
    lib.factrie_session_report_json.argtypes = [ctypes.c_void_p]
    lib.factrie_run_question.restype = ctypes.c_void_p
    lib.factrie_run_question.argtypes = [ctypes.c_void_p, ctypes.c_char_p, ctypes.c_char_p, LOGITS_FN,
                                         ctypes.c_void_p]
    return lib


lib = load_library(LIB)


def take_string(ptr):
    assert ptr, lib.factrie_last_error()
    try:
        return ctypes.string_at(ptr).decode("utf-8", "replace")
    finally:
        lib.factrie_string_free(ptr)


def float_bits(values):
    return [struct.pack("<f", v) for v in values]


def setUpModule():
    shutil.rmtree(WORK, ignore_errors=True)
    os.makedirs(WORK)
    index = os.path.join(WORK, "kb.ftrx")
    subprocess.run([CLI, "ingest", "--triples", os.path.join(DATA, "triples.tsv"), "--labels",
                    os.path.join(DATA, "labels.tsv"), "--index", index, "--cutoff-depth", "4"],
                   check=True, stdout=subprocess.DEVNULL)
    subprocess.run([CLI, "export-golden", "--index", index, "--count", "300", "--seed", "11", "--output",
                    os.path.join(WORK, "golden.jsonl")], check=True, stdout=subprocess.DEVNULL)


def tearDownModule():
    shutil.rmtree(WORK, ignore_errors=True)


class EngineTest(unittest.TestCase):
    def setUp(self):
        self.engine = lib.factrie_engine_open(os.path.join(WORK, "kb.ftrx").encode(), None)
        self.assertTrue(self.engine, lib.factrie_last_error())
        self.vocab = lib.factrie_vocab_size(self.engine)

    def tearDown(self):
        lib.factrie_engine_close(self.engine)

    def encode(self, text):
        n = ctypes.c_size_t()
        self.assertEqual(lib.factrie_encode(self.engine, text.encode(), None, 0, ctypes.byref(n)), 0)
        ids = (ctypes.c_uint32 * n.value)()
        self.assertEqual(lib.factrie_encode(self.engine, text.encode(), ids, n.value, ctypes.byref(n)), 0)
        return list(ids)

    def allowed(self, session):
        n = ctypes.c_size_t()
        self.assertEqual(lib.factrie_session_allowed(session, None, None, 0, ctypes.byref(n)), 0)
        tokens = (ctypes.c_uint32 * n.value)()
        leaves = (ctypes.c_uint64 * n.value)()
        self.assertEqual(lib.factrie_session_allowed(session, tokens, leaves, n.value, ctypes.byref(n)), 0)
        return list(zip(tokens, leaves))

    def test_golden_fixtures_mask_bit_for_bit(self):
        count = 0
        with open(os.path.join(WORK, "golden.jsonl")) as f:
            for line in f:
                g = json.loads(line)
                session = lib.factrie_session_create(self.engine)
                for t in g["steps"]:
                    self.assertEqual(lib.factrie_session_step(session, t), 0)
                self.assertEqual(bool(lib.factrie_session_is_constrained(session)), g["mode"] == "constrained")
                logits = (ctypes.c_float * self.vocab)(*[-math.inf if v is None else v for v in g["logits"]])
                self.assertEqual(lib.factrie_session_mask(session, logits, self.vocab), 0)
                expected = [-math.inf if v is None else v for v in g["masked"]]
                self.assertEqual(float_bits(logits), float_bits(expected))
                self.assertEqual([list(p) for p in self.allowed(session)], g["allowed"])
                lib.factrie_session_free(session)
                count += 1
        self.assertEqual(count, 300)

    def enumerate_facts(self, session, out):
        report = json.loads(take_string(lib.factrie_session_report_json(session)))
        if not lib.factrie_session_is_constrained(session):
            out.append(report["facts"][-1]["text"])
            return
        for token, _ in self.allowed(session):
            child = lib.factrie_session_fork(session)
            self.assertEqual(lib.factrie_session_step(child, token), 0)
            self.enumerate_facts(child, out)
            lib.factrie_session_free(child)

    def test_forked_sessions_enumerate_the_kb(self):
        session = lib.factrie_session_create(self.engine)
        for t in self.encode("Fact:"):
            lib.factrie_session_step(session, t)
        facts = []
        self.enumerate_facts(session, facts)
        lib.factrie_session_free(session)
        self.assertEqual(len(facts), 17)
        self.assertEqual(len(set(facts)), 17)
        self.assertIn("<Danny Boyle> <date of birth> <1956-10-20> .", facts)

    def test_illegal_step_reports_its_code(self):
        session = lib.factrie_session_create(self.engine)
        for t in self.encode("Fact:"):
            lib.factrie_session_step(session, t)
        code = lib.factrie_session_step(session, lib.factrie_eos_token())
        self.assertEqual(lib.factrie_error_name(code), b"IllegalToken")
        self.assertIn(b"not allowed", lib.factrie_last_error())
        lib.factrie_session_free(session)

    def test_host_sampling_loop_only_emits_kb_facts(self):
        trigger = self.encode("Fact:")
        eos = lib.factrie_eos_token()
        state = {"prompt": None}

        # Spells the trigger, then prefers end-of-sequence; inside a Fact
        # command the engine masks EOS so the walk picks an indexed fact.
        @LOGITS_FN
        def host(user, context, n, logits, vocab):
            if state["prompt"] is None:
                state["prompt"] = n
            step = n - state["prompt"]
            for i in range(vocab):
                logits[i] = 0.0
            if step < len(trigger):
                logits[trigger[step]] = 10.0
            else:
                logits[eos] = 1.0
            return 0

        cfg = json.dumps({"few_shot_path": os.path.join(DATA, "few_shot.txt"), "beams": 1, "max_new_tokens": 200})
        transcript = json.loads(take_string(
            lib.factrie_run_question(self.engine, b"Who directed Trainspotting?", cfg.encode(), host, None)))
        self.assertEqual(len(transcript["facts"]), 1)

        session = lib.factrie_session_create(self.engine)
        for t in trigger:
            lib.factrie_session_step(session, t)
        known = []
        self.enumerate_facts(session, known)
        lib.factrie_session_free(session)
        self.assertIn(transcript["facts"][0]["text"], known)

    def test_failing_host_callback_aborts_the_run(self):
        @LOGITS_FN
        def broken(user, context, n, logits, vocab):
            return 1

        cfg = json.dumps({"few_shot_path": os.path.join(DATA, "few_shot.txt"), "beams": 1})
        ptr = lib.factrie_run_question(self.engine, b"q", cfg.encode(), broken, None)
        self.assertFalse(ptr)
        self.assertIn(b"callback", lib.factrie_last_error())

    def test_missing_index_fails_cleanly(self):
        self.assertFalse(lib.factrie_engine_open(os.path.join(WORK, "none.ftrx").encode(), None))
        self.assertIn(b"BackendRead", lib.factrie_last_error())


if __name__ == "__main__":
    unittest.main(verbosity=2)
