"""Parameter and disturbance definitions for the converter model."""

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class ConverterParams:
    """Physical and control constants of the grid-following converter.

    The defaults are per-unit values. V_int and c follow a typical grid-code
    ride-through characteristic and T_m places the LVRT boundary of a 0.4 pu
    dip at about 0.173 s.

    Attributes:
        T_p: d-axis current lag time constant [s]
        T_q: q-axis current lag time constant [s]
        T_m: voltage measurement filter time constant [s]
        K_pomega: PLL proportional gain [pu/pu]
        omega_ref: nominal angular frequency [pu]
        K_RCI: reactive current injection droop gain [pu/pu]
        I_Q0: reactive injection offset [pu]
        V_Q: voltage below which reactive support starts [pu]
        I_nom: converter current limit [pu]
        V_int: LVRT entry threshold [pu]
        V_min: voltage below which the converter delivers no current [pu]
        c: LVRT droop ceiling [-]
        R_c: coupling resistance [pu]
        L_c: coupling inductance [pu]
        P_ext: active power set-point [pu]
        Q_ext: reactive power set-point [pu]
        v_limit: V_meas threshold switching the current limiter priority [pu]
    """

    T_p: float = 0.02
    T_q: float = 0.02
    T_m: float = 0.125
    K_pomega: float = 5.0
    omega_ref: float = 1.0
    K_RCI: float = 1.0
    I_Q0: float = 0.1
    V_Q: float = 0.9
    I_nom: float = 1.1
    V_int: float = 0.7
    V_min: float = 0.3
    c: float = 0.6
    R_c: float = 0.005
    L_c: float = 0.05
    P_ext: float = 0.8
    Q_ext: float = 0.2
    v_limit: float = 0.9

    def validate(self) -> "ConverterParams":
        """Check the parameter invariants.

        Returns:
            self, to allow chaining

        Raises:
            ValueError: If any invariant is violated
        """
        for name in ("T_p", "T_q", "T_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.V_min < self.V_int < 1:
            raise ValueError(
                f"Expected 0 < V_min < V_int < 1, got V_min={self.V_min}, V_int={self.V_int}"
            )
        if not 0 < self.c <= 1:
            raise ValueError(f"c must lie in (0, 1], got {self.c}")
        if self.I_nom <= 0:
            raise ValueError(f"I_nom must be > 0, got {self.I_nom}")
        if self.V_Q > 1:
            raise ValueError(f"V_Q must be <= 1, got {self.V_Q}")
        return self

    def with_overrides(self, **overrides: float) -> "ConverterParams":
        """Return a validated copy with some fields replaced."""
        return replace(self, **overrides).validate()

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class DisturbanceSpec:
    """Rectangular voltage dip applied to the external grid voltage.

    Attributes:
        delta_V: dip magnitude [pu]
        delta_T: dip duration [s]
        V_set: pre-fault external voltage [pu]
    """

    delta_V: float
    delta_T: float
    V_set: float = 1.0

    def __post_init__(self):
        if not 0 <= self.delta_V < self.V_set:
            raise ValueError(
                f"delta_V must satisfy 0 <= delta_V < V_set, got {self.delta_V} (V_set={self.V_set})"
            )
        if self.delta_T < 0:
            raise ValueError(f"delta_T must be >= 0, got {self.delta_T}")

    def voltage(self, tau: float) -> float:
        """External voltage V_t at time tau."""
        return self.V_set - self.delta_V if 0 <= tau < self.delta_T else self.V_set
