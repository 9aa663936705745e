"""
Spectral stage: smoothed periodograms and band powers per unit
"""
import pandas as pd

from spectral import band_power, estimate_spectrum
from stages.base_stage import BaseStage, StageContext
from stages.stage_system import StageMetadata


class SpectralStage(BaseStage):
    """Band power features under the reference partition."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="spectral",
            description="Tapered, smoothed spectra and low/mid/high band power",
            order=10,
            dependencies=["ingest"],
            artifacts=["band_power.csv"],
        )

    def run(self, context: StageContext) -> None:
        demeaned = context.require('demeaned')
        fips_codes = list(demeaned)

        spectra = context.map_units(
            lambda fips: estimate_spectrum(demeaned[fips], self.config.taper_proportion, self.config.smoothing_spans),
            fips_codes,
        )
        context.results['spectra'] = dict(zip(fips_codes, spectra))

        partition = self.config.partition
        rows = []
        for fips, spec in zip(fips_codes, spectra):
            bands = band_power(spec, partition)
            rows.append({
                'fips': fips,
                'p_low': bands.p_low,
                'p_mid': bands.p_mid,
                'p_high': bands.p_high,
                'total_power': spec.total_power,
            })
        frame = pd.DataFrame(rows, columns=['fips', 'p_low', 'p_mid', 'p_high', 'total_power'])
        context.results['bands'] = frame
        context.write_csv("band_power.csv", frame)
