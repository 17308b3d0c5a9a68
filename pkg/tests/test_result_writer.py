#!/usr/bin/env python3
"""
Tests for result persistence.
"""
import json
import unittest
import sys
from pathlib import Path
import tempfile

import numpy as np

# Add the parent directory to the path so we can import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

from fluctchain.utils.result_writer import (
    RunRecord,
    emit_heatmap,
    file_checksum,
    heatmap_pixels,
    read_csv,
    write_csv,
    write_json,
    write_run_record,
)


class TestHeatmaps(unittest.TestCase):
    """Test cases for heatmap output."""

    def setUp(self):
        """Set up a temporary output directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        """Clean up the output directory."""
        self.tmp.cleanup()

    def test_text_and_image_written(self):
        """Test both files, PGM header and round-tripped text values."""
        matrix = np.array([[1.0, 0.0, 0.0], [0.25, 0.5, 0.25]])
        text_path, image_path = emit_heatmap(matrix, self.out / 'panel')
        self.assertEqual(text_path.suffix, '.txt')
        np.testing.assert_allclose(np.loadtxt(text_path), matrix, rtol=1e-12)

        raw = image_path.read_bytes()
        self.assertTrue(raw.startswith(b"P5\n3 2\n255\n"))
        pixels = np.frombuffer(raw[len(b"P5\n3 2\n255\n"):], dtype=np.uint8).reshape(2, 3)
        self.assertEqual(pixels[0, 0], 0)
        self.assertEqual(pixels[0, 1], 255)
        self.assertEqual(pixels[1, 1], 127)

    def test_halves_round_up(self):
        """Test gray levels round half up rather than to even."""
        matrix = np.array([[255.0, 127.5, 126.5, 2.5]])
        self.assertEqual(heatmap_pixels(matrix).tolist(), [[0, 127, 128, 252]])

    def test_dotted_names_keep_their_stem(self):
        """Test per-gamma names such as g0.1 are not read as suffixes."""
        first = emit_heatmap(np.ones((2, 2)), self.out / 'ensemble_g0.1_single')
        second = emit_heatmap(np.ones((2, 2)), self.out / 'ensemble_g0.5_mean')
        self.assertEqual([p.name for p in first], ['ensemble_g0.1_single.txt', 'ensemble_g0.1_single.pgm'])
        self.assertEqual([p.name for p in second], ['ensemble_g0.5_mean.txt', 'ensemble_g0.5_mean.pgm'])
        self.assertEqual(len(list(self.out.iterdir())), 4)

    def test_zero_matrix_is_white(self):
        """Test the all-zero degenerate case."""
        self.assertTrue(np.all(heatmap_pixels(np.zeros((2, 4))) == 255))

    def test_invalid_matrices(self):
        """Test NaN, negative and 1-D input."""
        for bad in (np.array([[np.nan, 1.0]]), np.array([[-0.1, 1.0]]), np.ones(3)):
            with self.assertRaises(ValueError):
                emit_heatmap(bad, self.out / 'bad')


class TestTables(unittest.TestCase):
    """Test cases for CSV and JSON output."""

    def test_csv_round_trip_is_exact(self):
        """Test repr-formatted floats read back bit-for-bit."""
        with tempfile.TemporaryDirectory() as tmp:
            t = np.linspace(0.0, 1.0, 7)
            msd = np.sqrt(t) / 3.0
            path = write_csv(Path(tmp) / 'nested' / 'series.csv', {'t': t, 'msd': msd})
            table = read_csv(path)
            self.assertEqual(list(table), ['t', 'msd'])
            np.testing.assert_array_equal(table['msd'], msd)

    def test_csv_validation(self):
        """Test the leading t column and equal lengths."""
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ValueError):
                write_csv(Path(tmp) / 'a.csv', {'msd': [1.0]})
            with self.assertRaises(ValueError):
                write_csv(Path(tmp) / 'b.csv', {'t': [0.0, 1.0], 'msd': [1.0]})

    def test_json_accepts_mappings_and_records(self):
        """Test plain dicts and dataclass_json objects."""
        with tempfile.TemporaryDirectory() as tmp:
            plain = write_json(Path(tmp) / 'plain.json', {'regime': 'localised'})
            self.assertEqual(json.loads(plain.read_text())['regime'], 'localised')
            record = RunRecord(experiment='bounds', version='0', seed=1, config={}, started_at='now')
            typed = write_json(Path(tmp) / 'record.json', record)
            self.assertEqual(json.loads(typed.read_text())['experiment'], 'bounds')


class TestRunRecord(unittest.TestCase):
    """Test cases for the run record."""

    def test_checksums_use_relative_names(self):
        """Test sha256 entries keyed by output-relative paths."""
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp)
            series = write_csv(out / 'series.csv', {'t': [0.0], 'msd': [0.0]})
            record = RunRecord(experiment='exact', version='0.3.0', seed=42, config={'chain': {'n': 5}},
                               started_at='2026-01-01T00:00:00')
            path = write_run_record(record, out, [series])
            loaded = RunRecord.from_json(path.read_text())
            self.assertEqual(loaded.checksums, {'series.csv': file_checksum(series)})
            self.assertEqual(len(loaded.checksums['series.csv']), 64)
            self.assertEqual(loaded.config['chain']['n'], 5)


if __name__ == '__main__':
    unittest.main()
