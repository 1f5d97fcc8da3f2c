"""
Unit test library
"""

import json
import os
import sys
import tempfile

from io import BytesIO


__all__ = ['make_temp_file', 'make_temp_dir', 'make_config_file',
           'CLI_main', 'VGG_BUCKET_NUMELS', 'VGG_BUCKET_MS']

# per-bucket element counts and allreduce times (ms) of VGG-19 on 64 GPUs
VGG_BUCKET_NUMELS = [4101096, 16781312, 107480576, 7079424, 7669760, 555072]
VGG_BUCKET_MS = [16.177, 99.205, 603.238, 36.513, 40.743, 34.218]

class TBytesIO(BytesIO):
    """In memory standard stream; text is stored as ASCII bytes."""

    def write(self, data):
        if not isinstance(data, bytes):
            data = data.encode('ascii')
        return BytesIO.write(self, data)

#
# Temp files and directories
#
def make_temp_file(text, suffix='', dir=None):
    """Create a temporary file with the provided text."""
    assert type(text) is bytes
    tmp = tempfile.NamedTemporaryFile(prefix='covap-test-',
                                      suffix=suffix, dir=dir)
    tmp.write(text)
    tmp.flush()
    return tmp

def make_temp_dir(suffix=''):
    """Create a temporary directory."""
    if len(suffix) > 0 and suffix[0] != '-':
        suffix = '-' + suffix
    return tempfile.mkdtemp(suffix, prefix='covap-test-')

def make_config_file(doc, suffix='.json', dir=None):
    """Create a temporary experiment config file from a dict."""
    return make_temp_file(json.dumps(doc).encode('ascii'), suffix, dir)

#
# CLI tests
#
def _check_output(test, value, expected, name):
    """Compare captured `value` with a bytes string or compiled regexp."""
    if expected is None:
        return
    if hasattr(expected, 'search'):
        test.assertTrue(expected.search(value),
                        "%s %r does not match %r" % (name, value,
                                                     expected.pattern))
    else:
        test.assertEqual(value, expected, name)

def CLI_main(test, main, args, expected_stdout, expected_rc=0,
             expected_stderr=None):
    """
    Call CLI `main` with argv `args`, capturing stdout and stderr, and
    check both outputs and the exit status.
    """
    rc = -1
    saved = sys.stdout, sys.stderr
    sys.stdout = out = TBytesIO()
    sys.stderr = err = TBytesIO()
    sys.argv = args
    try:
        main()
    except SystemExit as exc:
        rc = int(str(exc))
    finally:
        sys.stdout, sys.stderr = saved

    try:
        _check_output(test, out.getvalue(), expected_stdout, "stdout")
        _check_output(test, err.getvalue(), expected_stderr, "stderr")
        if expected_rc is not None:
            test.assertEqual(rc, expected_rc,
                             "rc=%d err=%s" % (rc, err.getvalue()))
    finally:
        out.close()
        err.close()
