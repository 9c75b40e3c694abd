from advsr.adaptive.nes import NES, QueryCounter, nes_grad
from advsr.adaptive.providers import BPDA, EOT, Exact, GradProvider, bpda_all, bpda_transform, bpda_wrap, eot_wrap
from advsr.adaptive.stack import WrapperSpec, build_provider, default_stack

__all__ = [
    'NES', 'QueryCounter', 'nes_grad',
    'BPDA', 'EOT', 'Exact', 'GradProvider', 'bpda_all', 'bpda_transform', 'bpda_wrap', 'eot_wrap',
    'WrapperSpec', 'build_provider', 'default_stack',
]
