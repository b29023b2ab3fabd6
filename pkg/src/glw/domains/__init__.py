from glw.domains.world import (
    DomainData, DomainRenderer, DomainSpec, World, derive_seed, draw_samples, generate_world,
    make_renderer, render_domain,
)
from glw.domains.modules import (
    SpecializedModule, decode, encode, fit_autoencoder, oracle_linear_module, train_modules,
)
from glw.domains.classifier import ClassifierHead, fit_classifier
from glw.domains.io import export_domain_csv, export_world_csv, import_domain_csv, import_world_csv

__all__ = [
    "DomainData", "DomainRenderer", "DomainSpec", "World", "derive_seed", "draw_samples",
    "generate_world", "make_renderer", "render_domain", "SpecializedModule", "decode", "encode",
    "fit_autoencoder", "oracle_linear_module", "train_modules", "ClassifierHead", "fit_classifier",
    "export_domain_csv", "export_world_csv", "import_domain_csv", "import_world_csv",
]
