"""
Experiment runner behind the command line.

Every command reads the same ExperimentConfig. Grid cells (defense x attack,
sweep value, gap transform) fail independently: the error is logged with
context, the row records it and the command exits with status 2.
"""
import json
import math
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import TypeAdapter

from advsr.adaptive.stack import build_provider, default_stack
from advsr.attacks import run_attack
from advsr.attacks.base import Target
from advsr.attacks.config import AttackConfig, AttackResult
from advsr.audio.manifest import DatasetManifest, check_role_partition
from advsr.audio.synth import synth_corpus
from advsr.audio.waveform import Waveform, quantize_pcm16_tensor
from advsr.audio.wav_io import write_wav
from advsr.exceptions import ConfigError
from advsr.harness.config import MANIFEST_ROLES, SWEEP_DEFAULTS, ExperimentConfig
from advsr.harness.results import GapRow, ResultRow, SweepRow, write_csv, write_summary, write_trace
from advsr.logging_config import get_harness_logger, log_error_with_context, log_performance
from advsr.metrics import EvalReport, asr, r1, summarize_distortion
from advsr.model.checkpoint import load_checkpoint, save_checkpoint
from advsr.model.enrollment import EnrollmentDB
from advsr.model.network import AudioNet, build_model
from advsr.model.system import SpeakerSystem, calibrate_threshold, enroll
from advsr.training.config import EpochRecord
from advsr.training.trainer import accuracy_of, adv_train, train
from advsr.transforms.gap import identity_gap
from advsr.transforms.specs import TransformSpec, build_transforms

logger = get_harness_logger()

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CELL_ERRORS = 2

_spec_adapter = TypeAdapter(TransformSpec)
_INT_PARAMS = {'q', 'k'}


def cell_seed(master: int, *coords: int) -> int:
    """Per-cell RNG seed derived from the master seed and the cell coordinates"""
    return int(np.random.SeedSequence([master, *coords]).generate_state(1)[0])


def cell_generator(master: int, *coords: int) -> torch.Generator:
    return torch.Generator().manual_seed(cell_seed(master, *coords))


class Victims:
    """Test voices as an equal-length batch with labels and stable example ids"""

    def __init__(self, x: torch.Tensor, y: torch.Tensor, ids: List[str], sample_rate: int):
        self.x = x
        self.y = y
        self.ids = ids
        self.sample_rate = sample_rate

    def __len__(self) -> int:
        return self.x.shape[0]

    def waveforms(self) -> List[Waveform]:
        return [Waveform.from_tensor(row, self.sample_rate) for row in self.x]


class ExperimentRunner:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._manifests: Optional[Dict[str, DatasetManifest]] = None

    # ---- data / model plumbing ----

    def manifests(self) -> Dict[str, DatasetManifest]:
        if self._manifests is None:
            self._manifests = self._load_manifests()
        return self._manifests

    def _load_manifests(self) -> Dict[str, DatasetManifest]:
        if self.cfg.dataset.manifests:
            found = {role: DatasetManifest.load(path) for role, path in self.cfg.dataset.manifests.items()}
            source = "configured manifests"
        else:
            on_disk = {role: self.cfg.data_dir / f"{role}.json" for role in MANIFEST_ROLES}
            found = {role: DatasetManifest.load(p) for role, p in on_disk.items() if p.is_file()}
            source = str(self.cfg.data_dir)
            if not found:
                found = synth_corpus(self.cfg.dataset.synthetic)
                source = "in-memory synthetic corpus"
        check_role_partition(found)
        logger.info(f"Using {source}: " + ", ".join(f"{r}={len(m)}" for r, m in found.items()))
        return found

    def manifest(self, role: str) -> DatasetManifest:
        manifests = self.manifests()
        if role not in manifests:
            raise ConfigError(f"no '{role}' manifest available")
        return manifests[role]

    def load_model(self) -> AudioNet:
        return load_checkpoint(self.cfg.checkpoint_path)

    def enrollment(self, model: AudioNet, rebuild: bool = False) -> Optional[EnrollmentDB]:
        """Enrollment database for the configured task (None for CSI-NE)"""
        task = self.cfg.model.task
        if task == 'CSI-NE':
            return None
        path = self.cfg.enrollment_path
        if path.is_file() and not rebuild:
            return EnrollmentDB.load(path)
        db = enroll(model, self.manifest('enroll'))
        if task in ('SV', 'OSI') and self.cfg.model.target_far is not None:
            theta = calibrate_threshold(db, model, self.manifest('imposter'), self.cfg.model.target_far)
            db = db.with_threshold(theta)
        db.save(path)
        logger.info(f"Saved enrollment database ({len(db)} speakers) to {path}")
        return db

    def system(self, model: AudioNet, db: Optional[EnrollmentDB]) -> SpeakerSystem:
        task = self.cfg.model.task
        return SpeakerSystem(model, (), db, task)

    def victims(self, system: SpeakerSystem, limit: Optional[int] = None) -> Victims:
        crop_s = self.cfg.training.crop_s
        limit = limit or self.cfg.output.max_examples
        rows, labels, ids = [], [], []
        for speaker_id, index, w in self.manifest('test').load_voices():
            if limit is not None and len(rows) >= limit:
                break
            if speaker_id not in system.speakers:
                raise ConfigError(f"test speaker '{speaker_id}' is unknown to the {system.task} system")
            if crop_s is not None:
                w = w.fit_length(int(round(crop_s * w.sample_rate)))
            rows.append(w.to_tensor())
            labels.append(system.speakers.index(speaker_id))
            ids.append(f"{speaker_id}-{index:03d}")
        if not rows:
            raise ConfigError("the test manifest holds no voices")
        return Victims(torch.stack(rows), torch.tensor(labels, dtype=torch.long), ids, system.sample_rate)

    def attack_target(self, system: SpeakerSystem, attack: AttackConfig) -> Target:
        if not attack.adaptive:
            return system
        stack = self.cfg.adaptive.stack or default_stack(system, self.cfg.adaptive.eot_draws)
        return build_provider(system, stack)

    def _trials(self, system: SpeakerSystem) -> int:
        return self.cfg.adaptive.trials if system.randomized else 1

    def _record_failure(self, what: str, e: Exception, **context) -> str:
        message = f"{type(e).__name__}: {e}"
        log_error_with_context(logger, f"{what} failed: {message}", **context)
        return message

    # ---- commands ----

    def cmd_synth_data(self) -> int:
        """Render the synthetic corpus to WAVs plus one manifest per role"""
        spec = self.cfg.dataset.synthetic
        try:
            manifests = synth_corpus(spec)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        check_role_partition(manifests)
        data_dir = self.cfg.data_dir
        data_dir.mkdir(parents=True, exist_ok=True)

        stored: Dict[str, str] = {}
        counters: Dict[str, int] = {}
        for role in MANIFEST_ROLES:
            if role not in manifests:
                continue
            manifest = manifests[role]
            entries = {}
            for speaker_id, refs in manifest.entries.items():
                paths = []
                for ref in refs:
                    if ref not in stored:
                        n = counters.get(speaker_id, 0)
                        counters[speaker_id] = n + 1
                        rel = f"wav/{speaker_id}/{n:03d}.wav"
                        (data_dir / rel).parent.mkdir(parents=True, exist_ok=True)
                        write_wav(manifest.resolve(ref), data_dir / rel)
                        stored[ref] = rel
                    paths.append(stored[ref])
                entries[speaker_id] = paths
            DatasetManifest(role=role, seed=manifest.seed, entries=entries).save(data_dir / f"{role}.json")
        logger.info(f"Wrote {len(stored)} voices and {len(manifests)} manifests to {data_dir}")
        return EXIT_OK

    def cmd_train(self) -> int:
        cfg = self.cfg
        section = cfg.training
        train_manifest = self.manifest('train')
        held_out = self.manifests().get('train-test')
        path = cfg.checkpoint_path
        if section.resume and path.is_file():
            model = load_checkpoint(path)
            logger.info(f"Resuming from {path}")
        else:
            first = train_manifest.resolve(next(train_manifest.items())[2])
            model = build_model(train_manifest.speakers, cfg.model.feature_config(), first.sample_rate,
                                seed=cfg.seed, **cfg.model.topology())
        transforms = build_transforms(section.transforms)
        tcfg = section.training_config()
        started = time.perf_counter()
        if section.adversarial:
            model, history = adv_train(model, train_manifest, section.attack, section.ratio, tcfg,
                                       held_out, transforms)
        else:
            model, history = train(model, train_manifest, tcfg, held_out, transforms)
        runtime = time.perf_counter() - started
        save_checkpoint(model, path)
        write_csv(history.records, cfg.out_dir / 'train_history.csv', EpochRecord)
        write_summary(cfg.out_dir / 'train_summary.json', 'train', history.records, {
            'checkpoint': str(path),
            'adversarial': section.adversarial,
            'test_accuracy': history.test_accuracy,
            'runtime_s': round(runtime, 3),
        })
        if cfg.model.task != 'CSI-NE':
            self.enrollment(model, rebuild=True)
        return EXIT_OK

    def _craft(self, target: Target, victims: Victims, attack: AttackConfig, *coords: int) -> List[AttackResult]:
        generator = cell_generator(self.cfg.seed, *coords)
        return run_attack(target, victims.waveforms(), victims.y.tolist(), attack, generator)

    def _store(self, attack: AttackConfig, victims: Victims, results: Sequence[AttackResult]) -> None:
        out = self.cfg.output
        if out.save_wavs:
            folder = self.cfg.out_dir / 'adv' / attack.label
            folder.mkdir(parents=True, exist_ok=True)
            index = {}
            for example_id, result in zip(victims.ids, results):
                write_wav(result.adv, folder / f"{example_id}.wav")
                index[f"{example_id}.wav"] = {'label': result.label, 'target': result.target,
                                              'success': result.success}
            with open(folder / 'index.json', 'w', encoding='utf-8') as f:
                json.dump(index, f, indent=2, sort_keys=True)
                f.write('\n')
        if out.dump_traces:
            for example_id, result in zip(victims.ids, results):
                write_trace(self.cfg.out_dir / 'traces' / attack.label / f"{example_id}.csv", result.loss_trace)

    @staticmethod
    def _distortion(results: Sequence[AttackResult],
                    fooled: Optional[Sequence[bool]] = None) -> Tuple[float, float]:
        """Mean stored L2 / SNR over successful voices; fooled overrides each result's own success"""
        fooled = [r.success for r in results] if fooled is None else list(fooled)
        summary = summarize_distortion([r.distortion_stored for r, ok in zip(results, fooled) if ok])
        return summary['l2_mean'], summary['snr_mean']

    def cmd_attack(self) -> int:
        """Attacks on the undefended model: one row per configured attack"""
        model = self.load_model()
        system = self.system(model, self.enrollment(model))
        victims = self.victims(system)
        a_b = accuracy_of(system, victims.x, victims.y)
        rows, failed = [], False
        for j, attack in enumerate(self.cfg.attacks):
            started = time.perf_counter()
            row = ResultRow(defense='none', attack=attack.label, adaptive=attack.adaptive, a_b=a_b,
                            examples=len(victims), seed=self.cfg.seed)
            try:
                results = self._craft(system, victims, attack, 0, j)
                stored = torch.stack([quantize_pcm16_tensor(r.adv.to_tensor()) for r in results])
                a_a = accuracy_of(system, stored, victims.y)
                l2, snr = self._distortion(results)
                row = row.model_copy(update={'a_a': a_a, 'asr': asr(results), 'r1': r1(a_b, a_a),
                                             'l2': l2, 'snr': snr})
                self._store(attack, victims, results)
            except Exception as e:
                failed = True
                row = row.model_copy(update={'error': self._record_failure(
                    f"attack {attack.label}", e, attack=attack.label)})
            rows.append(row.model_copy(update={'runtime_s': round(time.perf_counter() - started, 3)}))
        write_csv(rows, self.cfg.out_dir / 'attack.csv', ResultRow)
        write_summary(self.cfg.out_dir / 'attack_summary.json', 'attack', rows)
        return EXIT_CELL_ERRORS if failed else EXIT_OK

    def _evaluate(self, system: SpeakerSystem, victims: Victims, stored: torch.Tensor,
                  results: Sequence[AttackResult], attack: AttackConfig,
                  *coords: int) -> Tuple[Dict[str, float], List[bool]]:
        """
        Accuracy and success rate of stored adversarial voices, averaged over
        trials, plus which voices fool the system in at least half the trials.
        """
        accs, wins, hits = [], [], []
        targets = torch.tensor([r.target if r.target is not None else -1 for r in results])
        for trial in range(self._trials(system)):
            with torch.no_grad():
                pred = system.predict(stored, cell_generator(self.cfg.seed, *coords, trial), claimed=victims.y)
            accs.append(float((pred == victims.y).double().mean()))
            if attack.targeted:
                if system.task == 'SV':
                    # the adversary claims the target speaker
                    with torch.no_grad():
                        pred = system.predict(stored, cell_generator(self.cfg.seed, *coords, trial), claimed=targets)
                hit = pred == targets
            else:
                hit = pred != victims.y
            wins.append(float(hit.double().mean()))
            hits.append(hit.double())
        fooled = (torch.stack(hits).mean(dim=0) >= 0.5).tolist()
        return ({'a_a': float(np.mean(accs)), 'a_a_std': float(np.std(accs)), 'asr': float(np.mean(wins)),
                 'trials': len(accs)}, fooled)

    def _benign(self, system: SpeakerSystem, victims: Victims, *coords: int) -> float:
        return float(np.mean([accuracy_of(system, victims.x, victims.y, cell_generator(self.cfg.seed, *coords, t))
                              for t in range(self._trials(system))]))

    def cmd_defend_eval(self) -> int:
        """
        Defense x attack grid. Non-adaptive attacks are crafted once on the
        undefended model; adaptive ones against each defended system. The l2
        and snr columns average over voices that fool the defended system.
        """
        model = self.load_model()
        base = self.system(model, self.enrollment(model))
        victims = self.victims(base)
        crafted: Dict[int, List[AttackResult]] = {}
        rows, reports, failed = [], {}, False

        for i, defense in enumerate(self.cfg.defenses):
            label = defense.label
            try:
                defended = base.with_transforms(build_transforms(defense.transforms))
                a_b = self._benign(defended, victims, 1, i)
            except Exception as e:
                failed = True
                error = self._record_failure(f"defense {label}", e, defense=label)
                rows.extend(ResultRow(defense=label, attack=a.label, adaptive=a.adaptive, seed=self.cfg.seed,
                                      error=error) for a in self.cfg.attacks)
                continue
            a_a_by_attack, asr_by_attack = {}, {}
            for j, attack in enumerate(self.cfg.attacks):
                started = time.perf_counter()
                row = ResultRow(defense=label, attack=attack.label, adaptive=attack.adaptive, a_b=a_b,
                                examples=len(victims), seed=self.cfg.seed)
                try:
                    if attack.adaptive:
                        results = self._craft(self.attack_target(defended, attack), victims, attack, 2, i, j)
                    else:
                        if j not in crafted:
                            crafted[j] = self._craft(base, victims, attack, 0, j)
                        results = crafted[j]
                    stored = torch.stack([quantize_pcm16_tensor(r.adv.to_tensor()) for r in results])
                    scores, fooled = self._evaluate(defended, victims, stored, results, attack, 3, i, j)
                    l2, snr = self._distortion(results, fooled)
                    row = row.model_copy(update={**scores, 'r1': r1(a_b, scores['a_a']), 'l2': l2, 'snr': snr})
                    a_a_by_attack[attack.label] = scores['a_a']
                    asr_by_attack[attack.label] = scores['asr']
                except Exception as e:
                    failed = True
                    row = row.model_copy(update={'error': self._record_failure(
                        f"{label} x {attack.label}", e, defense=label, attack=attack.label)})
                rows.append(row.model_copy(update={'runtime_s': round(time.perf_counter() - started, 3)}))
            reports[label] = EvalReport.build(a_b, a_a_by_attack, asr_by_attack).model_dump()

        write_csv(rows, self.cfg.out_dir / 'defend_eval.csv', ResultRow)
        write_summary(self.cfg.out_dir / 'defend_eval_summary.json', 'defend-eval', rows, {'reports': reports})
        return EXIT_CELL_ERRORS if failed else EXIT_OK

    @staticmethod
    def sweep_spec(kind: str, param: str, value: float):
        v = int(round(value)) if param in _INT_PARAMS else float(value)
        return _spec_adapter.validate_python({'kind': kind, param: v})

    def cmd_sweep(self) -> int:
        """Per-parameter (a_b, a_a under FGSM, R1) curves; the max-R1 value is marked optimal"""
        cfg = self.cfg
        model = self.load_model()
        base = self.system(model, self.enrollment(model))
        victims = self.victims(base)
        attack = cfg.sweep.attack
        rows: List[SweepRow] = []
        optima: Dict[str, Optional[float]] = {}
        failed = False
        results = self._craft(base, victims, attack, 0, 0)
        stored = torch.stack([quantize_pcm16_tensor(r.adv.to_tensor()) for r in results])

        for i, target in enumerate(cfg.sweep.targets):
            values = target.values if target.values is not None else SWEEP_DEFAULTS[(target.kind, target.param)]
            curve: List[SweepRow] = []
            for k, value in enumerate(values):
                started = time.perf_counter()
                row = SweepRow(transform=target.kind, param=target.param, value=float(value))
                try:
                    defended = base.with_transforms([self.sweep_spec(target.kind, target.param, value).build()])
                    a_b = self._benign(defended, victims, 4, i, k)
                    a_a = self._evaluate(defended, victims, stored, results, attack, 5, i, k)[0]['a_a']
                    row = row.model_copy(update={'a_b': a_b, 'a_a': a_a, 'r1': r1(a_b, a_a)})
                except Exception as e:
                    failed = True
                    row = row.model_copy(update={'error': self._record_failure(
                        f"sweep {target.kind}.{target.param}={value}", e, transform=target.kind, value=value)})
                curve.append(row.model_copy(update={'runtime_s': round(time.perf_counter() - started, 3)}))
            scored = [(r.r1, -n) for n, r in enumerate(curve) if not r.error and math.isfinite(r.r1)]
            key = f"{target.kind}.{target.param}"
            optima[key] = None
            if scored:
                best = -max(scored)[1]
                curve[best] = curve[best].model_copy(update={'optimal': True})
                optima[key] = curve[best].value
                logger.info(f"Sweep {key}: optimum {curve[best].value:g} (R1 {curve[best].r1:.4f})")
            rows.extend(curve)

        write_csv(rows, cfg.out_dir / 'sweep.csv', SweepRow)
        write_summary(cfg.out_dir / 'sweep_summary.json', 'sweep', rows, {'optima': optima})
        return EXIT_CELL_ERRORS if failed else EXIT_OK

    def cmd_gap(self) -> int:
        """Mean L2 distance a transform moves clean voices, ascending"""
        specs = self.cfg.gap.transforms
        if not specs:
            raise ConfigError("gap needs at least one transform")
        corpus = [w for _, _, w in self.manifest('test').load_voices()]
        if self.cfg.gap.max_voices is not None:
            corpus = corpus[:self.cfg.gap.max_voices]
        rows, failed = [], False
        for spec in specs:
            label = spec.kind
            try:
                t = spec.build()
                label = t.label
                rows.append(GapRow(transform=label, gap=identity_gap(t, corpus, seed=self.cfg.seed)))
            except Exception as e:
                failed = True
                rows.append(GapRow(transform=label, error=self._record_failure(f"gap {label}", e, transform=label)))
        rows.sort(key=lambda r: (bool(r.error), r.gap if math.isfinite(r.gap) else math.inf, r.transform))
        write_csv(rows, self.cfg.out_dir / 'gap.csv', GapRow)
        write_summary(self.cfg.out_dir / 'gap_summary.json', 'gap', rows)
        log_performance("gap finished", transforms=len(rows), voices=len(corpus))
        return EXIT_CELL_ERRORS if failed else EXIT_OK


COMMANDS = {
    'synth-data': ExperimentRunner.cmd_synth_data,
    'train': ExperimentRunner.cmd_train,
    'attack': ExperimentRunner.cmd_attack,
    'defend-eval': ExperimentRunner.cmd_defend_eval,
    'sweep': ExperimentRunner.cmd_sweep,
    'gap': ExperimentRunner.cmd_gap,
}


def run_command(command: str, cfg: ExperimentConfig) -> int:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command '{command}', expected one of {sorted(COMMANDS)}")
    return COMMANDS[command](ExperimentRunner(cfg))
