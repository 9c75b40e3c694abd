"""
Wrapper stacks declared in configuration, outermost first, e.g.
[eot(r=50), bpda(identity), exact].
"""
from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field

from advsr.adaptive.nes import NES
from advsr.adaptive.providers import EOT, Exact, GradProvider, bpda_all
from advsr.exceptions import ConfigError
from advsr.model.system import SpeakerSystem


class WrapperSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal['exact', 'bpda', 'eot', 'nes']
    r: int = Field(50, ge=1)
    m: int = Field(50, ge=2)
    sigma: float = Field(1e-3, gt=0)
    surrogate: Literal['identity'] = 'identity'


def default_stack(system: SpeakerSystem, eot_draws: int = 50) -> List[WrapperSpec]:
    """BPDA where a transform is non-differentiable, EOT where one is randomized"""
    stack = []
    if system.randomized:
        stack.append(WrapperSpec(kind='eot', r=eot_draws))
    if any(not t.differentiable for t in system.transforms):
        stack.append(WrapperSpec(kind='bpda'))
    stack.append(WrapperSpec(kind='exact'))
    return stack


def build_provider(system: SpeakerSystem, stack: List[WrapperSpec]) -> GradProvider:
    """
    Raises:
        ConfigError: the stack does not end in exactly one exact/nes base
    """
    if not stack or stack[-1].kind not in ('exact', 'nes'):
        raise ConfigError("wrapper stack must end with 'exact' or 'nes'")
    if any(spec.kind in ('exact', 'nes') for spec in stack[:-1]):
        raise ConfigError("'exact' / 'nes' may only appear last in a wrapper stack")
    base = stack[-1]
    provider: GradProvider = Exact(system) if base.kind == 'exact' else NES(system, base.m, base.sigma)
    for spec in reversed(stack[:-1]):
        if spec.kind == 'bpda':
            provider = bpda_all(provider)
        else:
            provider = EOT(provider, spec.r)
    return provider
