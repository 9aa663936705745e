"""
Bispectral stage: integrated bispectral intensity and phase coupling per unit
"""
import pandas as pd

from bispectral import bispectral_intensity, bispectrum_direct, phase_coupling_index
from spectral import dft
from stages.base_stage import BaseStage, StageContext
from stages.stage_system import StageMetadata


class BispectralStage(BaseStage):
    """Bispectral intensity features."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="bispectral",
            description="Direct bispectrum, intensity and phase coupling index",
            order=20,
            dependencies=["ingest"],
            artifacts=["bispectral.csv", "bispectrum_grid.csv"],
        )

    def run(self, context: StageContext) -> None:
        demeaned = context.require('demeaned')
        fips_codes = list(demeaned)

        def analyse(fips):
            coeffs = dft(demeaned[fips])
            summary = bispectrum_direct(coeffs)
            bispectral_intensity(summary)
            return summary, phase_coupling_index(coeffs)

        results = context.map_units(analyse, fips_codes)

        rows = []
        grid = []
        for fips, (summary, coupling) in zip(fips_codes, results):
            rows.append({
                'fips': fips,
                'intensity': summary.intensity,
                'log10_intensity': summary.log10_intensity,
                'phase_coupling': coupling,
                'domain_size': summary.domain_size,
            })
            if self.config.export_bispectrum_grid:
                grid.extend({'fips': fips, 'k': k, 'l': l, 'magnitude_sq': value}
                            for k, l, value in summary.triples())

        frame = pd.DataFrame(rows, columns=['fips', 'intensity', 'log10_intensity', 'phase_coupling', 'domain_size'])
        context.results['bispectra'] = frame
        context.write_csv("bispectral.csv", frame)
        if self.config.export_bispectrum_grid:
            context.write_csv("bispectrum_grid.csv", pd.DataFrame(grid, columns=['fips', 'k', 'l', 'magnitude_sq']))
