import os
import json
import hashlib
import logging

import pandas as pd

from src.core.errors import OutputError

logger = logging.getLogger("consentaneous_sim")

# Shortest round-trip repr, so re-runs produce byte-identical files
def format_float(x):
    return repr(float(x))


def q_tag(q):
    """Threshold as used in file names: 0.3 -> '0.3', 2.0 -> '2'."""
    return f"{q:g}"


def sha256_of(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class OutputFinisher:
    def __init__(self, output_dir):
        """
        Owns one experiment output directory and every file written into it.

        LAYOUT:
        ------------------------------------------------------------
        | manifest.json          | resolved config, seeds, checksums |
        | report.txt             | human-readable run summary        |
        | pdf_T_q<q>.csv         | bin_center,density,count          |
        | pdf_theta_q<q>.csv     | bin_center,density,count          |
        | psd.csv                | freq_per_day,power                |
        | fits.csv               | target,range_lo,range_hi,...      |
        | series/r<idx>.csv      | t_days,r (only with series dumps) |
        | plot_<target>.gp       | gnuplot scripts (only with plots) |
        ------------------------------------------------------------
        """
        self.output_dir = output_dir
        self.written = {}
        try:
            os.makedirs(output_dir, exist_ok=True)
        except OSError as e:
            raise OutputError(output_dir, e)

    def _path(self, name):
        return os.path.join(self.output_dir, name)

    def save_frame(self, df, name, track=True):
        """Writes a DataFrame as CSV (header row, LF endings, '.' decimals)."""
        path = self._path(name)
        try:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            df.to_csv(path, index=False, sep=",", float_format=format_float, lineterminator="\n")
        except OSError as e:
            raise OutputError(path, e)
        if track:
            self.written[name] = sha256_of(path)
        logger.debug(f"Saved {name} ({len(df)} rows)")
        return path

    def save_text(self, text, name, track=True):
        path = self._path(name)
        try:
            with open(path, "w", newline="\n") as f:
                f.write(text)
        except OSError as e:
            raise OutputError(path, e)
        if track:
            self.written[name] = sha256_of(path)
        return path

    # --- DOMAIN WRITERS ---

    def save_trajectory(self, traj, name="trajectory.csv"):
        return self.save_frame(traj.to_frame(), name)

    def save_series(self, series, name="series.csv"):
        return self.save_frame(series.to_frame(), name)

    def save_episodes(self, episode_sets, name="episodes.csv"):
        rows = []
        for es in episode_sets:
            for kind in ("T", "theta"):
                d = es.durations(kind)
                rows.append(pd.DataFrame({"kind": kind, "q": es.q, "duration_days": d}))
        df = pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(columns=["kind", "q", "duration_days"])
        return self.save_frame(df[["kind", "q", "duration_days"]], name)

    def save_pdf(self, pdf, kind, q):
        df = pd.DataFrame({"bin_center": pdf.bin_centers, "density": pdf.density, "count": pdf.counts})
        return self.save_frame(df, f"pdf_{kind}_q{q_tag(q)}.csv")

    def save_psd(self, spectrum, name="psd.csv"):
        df = pd.DataFrame({"freq_per_day": spectrum.frequencies, "power": spectrum.power})
        return self.save_frame(df, name)

    def save_fits(self, rows, name="fits.csv"):
        """rows: dicts with target, range_lo, range_hi, exponent, stderr."""
        df = pd.DataFrame(rows, columns=["target", "range_lo", "range_hi", "exponent", "stderr"])
        return self.save_frame(df, name)

    def save_manifest(self, manifest):
        """manifest.json is not checksummed itself; it carries the checksums."""
        path = self._path("manifest.json")
        try:
            with open(path, "w", newline="\n") as f:
                json.dump(manifest, f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise OutputError(path, e)
        logger.info(f"Saved manifest: {path}")
        return path

    # --- GNUPLOT ---

    def save_duration_plot(self, kind, thresholds, guide_exponent=1.5):
        """gnuplot script overlaying the duration PDFs of every q, log-log, days."""
        label = "T" if kind == "T" else "{/Symbol q}"
        lines = [
            "set terminal pngcairo size 900,650",
            f"set output 'plot_{kind}.png'",
            "set logscale xy",
            "set format xy '10^{%L}'",
            f"set xlabel '{label}, days'",
            f"set ylabel 'P({label})'",
            "set datafile separator ','",
            "set key top right",
            f"guide(x) = 1e-1 * x**(-{guide_exponent})",
        ]
        plots = [
            f"'pdf_{kind}_q{q_tag(q)}.csv' skip 1 using 1:($3 > 0 ? $2 : 1/0) with linespoints title 'q={q_tag(q)}'"
            for q in thresholds
        ]
        plots.append(f"guide(x) with lines lc rgb 'gray' dt 2 title 'power law {guide_exponent:g}'")
        lines.append("plot " + ", \\\n     ".join(plots))
        return self.save_text("\n".join(lines) + "\n", f"plot_{kind}.gp")

    def save_psd_plot(self):
        lines = [
            "set terminal pngcairo size 900,650",
            "set output 'plot_psd.png'",
            "set logscale xy",
            "set format xy '10^{%L}'",
            "set xlabel 'f, 1/day'",
            "set ylabel 'S(f)'",
            "set datafile separator ','",
            "plot 'psd.csv' skip 1 using 1:2 with lines title 'model'",
        ]
        return self.save_text("\n".join(lines) + "\n", "plot_psd.gp")
