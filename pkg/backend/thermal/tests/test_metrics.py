import math

import numpy as np
from django.test import SimpleTestCase
from scipy import signal as sp_signal
from scipy.integrate import trapezoid

from thermal.exceptions import ConfigurationError, ConstantSignal, RateTooLow, SignalError, TooShort
from thermal.metrics import (
    METRIC_NAMES, MetricSet, SqiBand, base_metrics, derived_sources, metric_set, psd, psqi,
    sdstv, sdtv, stv, td,
)
from thermal.signal_pipeline import ThermalSignal, lowpass, person_context, reject_outliers
from thermal.synth import SignalSpec, gen_signal, preset_spec


def ramp(slope, duration=300.0, rate=4.0, start=30.0):
    t = np.arange(int(duration * rate)) / rate
    return ThermalSignal(start + slope * t, rate)


def tone(freq, duration=100.0, rate=4.0, amp=1.0):
    t = np.arange(int(duration * rate)) / rate
    return ThermalSignal(34.0 + amp * np.sin(2 * np.pi * freq * t), rate)


class BaseMetricTests(SimpleTestCase):
    def test_constant_signal_is_exactly_zero(self):
        sig = ThermalSignal(np.full(1200, 33.3), 4.0)
        self.assertEqual(td(sig), 0.0)
        self.assertEqual(stv(sig).slope, 0.0)
        self.assertAlmostEqual(stv(sig).intercept, 33.3)
        self.assertEqual(sdstv(sig), 0.0)
        self.assertEqual(sdtv(sig), 0.0)

    def test_td_endpoints(self):
        self.assertAlmostEqual(td(ThermalSignal([30.0, 30.5, 29.0], 1.0)), -1.0)

    def test_td_stress_drop(self):
        self.assertAlmostEqual(td(ramp(-0.56 / 299.75)), -0.56, places=9)

    def test_stv_exact_ramp(self):
        fit = stv(ramp(0.02))
        self.assertAlmostEqual(fit.slope, 0.02, delta=1e-9)
        self.assertLess(fit.residual_rms, 1e-9)
        self.assertLessEqual(sdstv(ramp(0.02)), 1e-12)

    def test_stv_noisy_ramp_against_normal_equations(self):
        spec = SignalSpec(duration=300.0, rate=4.0, drift_slope=0.01, noise_sd=0.05, seed=8)
        sig = gen_signal(spec).signal
        fit = stv(sig)

        design = np.column_stack([np.ones(sig.n), sig.times])
        beta = np.linalg.solve(design.T @ design, design.T @ sig.samples)
        self.assertAlmostEqual(fit.slope, beta[1], delta=1e-9)
        self.assertAlmostEqual(fit.intercept, beta[0], delta=1e-9)

        standard_error = 0.05 / math.sqrt(np.sum((sig.times - sig.times.mean()) ** 2))
        self.assertLess(abs(fit.slope - 0.01), 4 * standard_error)

    def test_sdstv_alternating(self):
        self.assertAlmostEqual(sdstv(ThermalSignal([30.0, 31.0, 30.0, 31.0], 1.0)), 2 / math.sqrt(3))

    def test_sdtv_two_points(self):
        self.assertAlmostEqual(sdtv(ThermalSignal([30.0, 32.0], 1.0)), math.sqrt(2))

    def test_ramp_sdtv_grows_while_sdstv_stays_zero(self):
        for step in (0.01, 0.05):
            sig = ThermalSignal(30.0 + step * np.arange(101), 1.0)
            self.assertAlmostEqual(sdtv(sig), step * math.sqrt(101 * 102 / 12), places=9)
            self.assertLess(sdstv(sig), 1e-12)

    def test_minimum_lengths(self):
        with self.assertRaises(TooShort):
            td(ThermalSignal([30.0], 1.0))
        with self.assertRaises(TooShort):
            sdstv(ThermalSignal([30.0, 31.0], 1.0))

    def test_offset_and_scale(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            x = ThermalSignal(rng.normal(34.0, rng.uniform(0.01, 2.0), 50), 4.0)
            c = rng.uniform(-100.0, 100.0)
            a = rng.uniform(0.1, 10.0)
            ref = base_metrics(x)
            shifted = base_metrics(x.with_samples(x.samples + c))
            scaled = base_metrics(x.with_samples(a * x.samples))
            for name, value in ref.items():
                self.assertAlmostEqual(shifted[name], value, delta=1e-9)
                self.assertAlmostEqual(scaled[name], a * value, delta=1e-9 * max(1.0, abs(a * value)))

    def test_time_reversal(self):
        sig = gen_signal(preset_spec('math_easy', seed=4)).signal
        rev = sig.with_samples(sig.samples[::-1])
        self.assertAlmostEqual(td(rev), -td(sig), places=12)
        self.assertAlmostEqual(sdstv(rev), sdstv(sig), places=12)
        self.assertAlmostEqual(sdtv(rev), sdtv(sig), places=12)

    def test_math_hard_more_variable_than_rest(self):
        wins = 0
        for seed in range(100):
            rest = gen_signal(preset_spec('rest', seed=seed)).signal
            hard = gen_signal(preset_spec('math_hard', seed=1000 + seed)).signal
            wins += sdstv(hard) > sdstv(rest)
        self.assertGreaterEqual(wins, 95)


class MetricSetTests(SimpleTestCase):
    def test_names_and_units(self):
        ms = metric_set(gen_signal(preset_spec('rest', seed=1)).signal)
        self.assertEqual(tuple(ms.as_dict()), METRIC_NAMES)
        self.assertEqual(len(METRIC_NAMES), 16)
        self.assertEqual(ms.units['STV'], 'degC/s')
        self.assertEqual(ms.units['STV_Ln'], '1/s')
        self.assertEqual(ms.units['SDTV_n'], '1')

    def test_constant_input_fails_normalisation(self):
        with self.assertRaises(ConstantSignal):
            metric_set(ThermalSignal(np.full(400, 33.0), 4.0))

    def test_ramp(self):
        ms = metric_set(ramp(0.01))
        self.assertAlmostEqual(ms['TD_L'], ms['TD'], delta=0.01)
        self.assertLess(ms['SDSTV'], 1e-12)
        self.assertLess(ms['SDSTV_L'], 1e-3)
        self.assertAlmostEqual(ms['TD_n'], 1.0, places=9)

    def test_cells_match_individual_operations(self):
        sessions = [reject_outliers(gen_signal(preset_spec(p, seed=3)).signal) for p in ('rest', 'math_hard')]
        context = person_context(sessions)
        ms = metric_set(sessions[1], context)
        for suffix, source in derived_sources(sessions[1], context).items():
            self.assertEqual(ms[f'TD{suffix}'], td(source))
            self.assertEqual(ms[f'STV{suffix}'], stv(source).slope)
            self.assertEqual(ms[f'SDSTV{suffix}'], sdstv(source))
            self.assertEqual(ms[f'SDTV{suffix}'], sdtv(source))

    def test_assembly_sessions_normalised_sdstv(self):
        def mean_sdstv(preset):
            values = []
            for seed in range(10):
                sig = reject_outliers(gen_signal(preset_spec(preset, seed=seed)).signal)
                values.append(metric_set(sig)['SDSTV_n'])
            return float(np.mean(values))

        assembly = mean_sdstv('assembly')
        stressors = mean_sdstv('assembly_stressors')
        self.assertGreater(stressors, assembly)
        self.assertAlmostEqual(assembly, 0.11, delta=0.02)
        self.assertAlmostEqual(stressors, 0.13, delta=0.02)

    def test_rejects_incomplete_or_invalid_sets(self):
        values = dict.fromkeys(METRIC_NAMES, 0.0)
        MetricSet(values)
        with self.assertRaises(ConfigurationError):
            MetricSet({k: v for k, v in values.items() if k != 'TD_L'})
        with self.assertRaises(SignalError):
            MetricSet({**values, 'SDTV_n': -0.1})
        with self.assertRaises(SignalError):
            MetricSet({**values, 'TD': float('inf')})


class SpectrumTests(SimpleTestCase):
    def test_bin_centred_tone(self):
        spectrum = psd(tone(0.3, duration=100.0))
        self.assertAlmostEqual(spectrum.bin_width, 0.01)
        peak = int(np.argmax(spectrum.power))
        self.assertAlmostEqual(spectrum.frequencies[peak], 0.3)
        lobe = spectrum.power[peak - 1: peak + 2].sum()
        self.assertGreaterEqual(lobe / spectrum.power.sum(), 0.99)
        # Hann main lobe: the peak bin holds two thirds of the tone
        self.assertAlmostEqual(spectrum.power[peak] / lobe, 2 / 3, places=6)

    def test_white_noise_is_flat(self):
        rng = np.random.default_rng(0)
        spectra = [psd(ThermalSignal(rng.normal(0.0, 1.0, 4096), 4.0)).power for _ in range(100)]
        mean_spectrum = np.mean(spectra, axis=0)[1:-1]
        self.assertLess(mean_spectrum.max(), 2 * mean_spectrum.mean())

    def test_parseval(self):
        sig = gen_signal(preset_spec('math_hard', seed=6)).signal
        spectrum = psd(sig)
        window = sp_signal.get_window('hann', sig.n)
        centred = sig.samples - sig.samples.mean()
        expected = np.sum((window * centred) ** 2) / np.sum(window ** 2)
        self.assertAlmostEqual(spectrum.power.sum() * spectrum.bin_width, expected, delta=0.01 * expected)

    def test_too_short(self):
        with self.assertRaises(TooShort):
            psd(ThermalSignal(np.arange(15.0), 4.0))

    def test_non_negative_and_ascending(self):
        spectrum = psd(gen_signal(SignalSpec(noise_sd=0.3, seed=2)).signal)
        self.assertTrue(np.all(spectrum.power >= 0))
        self.assertTrue(np.all(np.diff(spectrum.frequencies) > 0))
        self.assertEqual(spectrum.frequencies[0], 0.0)
        self.assertAlmostEqual(spectrum.frequencies[-1], 2.0)


class PsqiTests(SimpleTestCase):
    def test_in_band_tone(self):
        self.assertGreaterEqual(psqi(tone(0.3)), 0.95)

    def test_slow_tone(self):
        self.assertLessEqual(psqi(tone(0.02, duration=300.0)), 0.05)

    def test_rate_too_low(self):
        with self.assertRaises(RateTooLow):
            psqi(tone(0.3, rate=1.5))

    def test_invalid_band(self):
        with self.assertRaises(ConfigurationError):
            SqiBand(0.5, 0.2)

    def test_bounded_and_reduced_by_lowpass(self):
        for seed in range(20):
            sig = gen_signal(SignalSpec(drift_slope=0.002, breathing_amp=0.1, noise_sd=0.05, seed=seed)).signal
            value = psqi(sig)
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 1.0)
            self.assertLessEqual(psqi(lowpass(sig)), value + 0.02)

    def test_respiratory_preset_against_brute_force(self):
        for seed in range(5):
            with self.subTest(seed=seed):
                sig = gen_signal(preset_spec('respiratory', seed=seed)).signal
                value = psqi(sig)

                # Explicit Hann-windowed DFT, integrated with the trapezoid rule
                n = sig.n
                k = np.arange(n)
                window = 0.5 - 0.5 * np.cos(2 * np.pi * k / n)
                x = (sig.samples - sig.samples.mean()) * window
                freqs = np.arange(n // 2 + 1) * sig.sample_rate / n
                dft = np.exp(-2j * np.pi * np.outer(np.arange(n // 2 + 1), k) / n) @ x
                power = np.abs(dft) ** 2
                band = (freqs >= 0.1) & (freqs <= 0.85)
                non_dc = freqs > 0
                oracle = trapezoid(power[band], freqs[band]) / trapezoid(power[non_dc], freqs[non_dc])

                self.assertAlmostEqual(value, oracle, delta=0.05)
                self.assertGreaterEqual(value, 0.63)
                self.assertLessEqual(value, 0.73)
