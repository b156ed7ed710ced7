"""Regenerates fixtures/concepts.jsonl and fixtures/concepts.json.

Each concept scripts the model side of one session: the instruction, the
replies the "model" gives, and the repair messages the loop would send in
between. Conversations are composed with the package's own prompt and
digest functions, then recorded as replay-provider fixtures, so a session
driven against these fixtures reproduces the scripted run exactly.

Run from the repository root: python3 scripts/build_concept_fixtures.py
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from sketchpilot.extractor import NoCodeFound, extract_sketch
from sketchpilot.hardware import HardwareManifest, load_default_catalog, manifest_to_prompt_context
from sketchpilot.llm import ChatMessage, Conversation, build_system_prompt, record_fixture
from sketchpilot.loop import CORRECTIVE_MESSAGE, diagnostics_to_prompt
from sketchpilot.toolchain import ToolchainConfig, compile_sketch, prepare_sketch_dir

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

GUIDING_STEPS_PROMPT = (
    "We have a Deneyap G board, to which we have connected a 5x7 matrix LED, as well as an "
    "I2C IMU (LSM6DSM). Could you create a simple navigation experience code for us? We will "
    "also add a battery to this setup and attach it to our shoe. For example, you could create "
    "a route that provides guidance like 'go straight for 10 steps' and 'turn right for 5 steps.'"
)

BAKE_HERO_PROMPT = (
    "Hello, I have connected a Deneyap G board to my computer with a usb cable. It also has a "
    'temperature sensor named "Deneyap Sicaklik nem ölçer". I have also attached a 5x7 led matrix '
    'named "5x7 Led Matris", via the I2C connectors. I want to wear this module on my hand, and '
    "I want it to measure the ambient temperature near my hand. And based on the temperature "
    "value, I want the rows of the LED matrix to light up as if it is a bar indicator. I don't "
    "want my hand to get too hot, I want to use this system as a visual warning for my hand, so "
    "that I can prevent myself putting my hand into a very hot oven or near an open fire or a "
    "stove. Can you provide the code for this operation?"
)

PEDAL_PULSE_PROMPT = (
    "I have a Deneyap G board which has an addressable RGB LED on it. Could you write me the "
    "code that changes the colors of the RGB LED based on the inclination information? We have "
    "also connected an I2C IMU sensor (LSM6DSM) to measure the inclination on the device."
)

FIT_FIT_PROMPT = (
    "I have a Deneyap G board which has an addressable RGB LED on it, and I attached an IMU "
    "sensor (LSM6DSM) to it via the provided I2C cable. I attached this setup to the belly of "
    "my cat to measure of his paws when he is burying his poop. Could you please generate the "
    "code to count how many times he used his paws when this process happens and give feedback "
    "using RGB led. For example 50 times of movement will be given as a red light on the sensor "
    "as a feedback."
)

GUIDING_STEPS_V1 = """```cpp
#include <Wire.h>

#ifndef MATRIX_I2C_ADDR
#error MATRIX_I2C_ADDR must be defined for the 5x7 LED matrix
#endif

const int STEP_THRESHOLD = 14000;
const int STRAIGHT_STEPS = 10;
const int RIGHT_STEPS = 5;

int stepCount = 0;
int phase = 0;

void setup() {
  Serial.begin(115200);
  Wire.begin();
  matrixClear();
  imuInit();
  showStraight();
}

void loop() {
  if (stepDetected()) {
    stepCount++;
    if (phase == 0 && stepCount >= STRAIGHT_STEPS) {
      phase = 1;
      stepCount = 0;
      showRight();
    } else if (phase == 1 && stepCount >= RIGHT_STEPS) {
      phase = 2;
      showDone();
    }
  }
  delay(20);
}

void imuInit() {
  Wire.beginTransmission(0x6A);
  Wire.write(0x10);
  Wire.write(0x60);
  Wire.endTransmission();
}

bool stepDetected() {
  Wire.beginTransmission(0x6A);
  Wire.write(0x2A);
  Wire.endTransmission(false);
  Wire.requestFrom(0x6A, 2);
  int az = Wire.read() | (Wire.read() << 8);
  static bool above = false;
  bool spike = abs(az) > STEP_THRESHOLD;
  bool stepped = spike && !above;
  above = spike;
  return stepped;
}

void matrixWrite(uint8_t row, uint8_t bits) {
  Wire.beginTransmission(MATRIX_I2C_ADDR);
  Wire.write(row);
  Wire.write(bits);
  Wire.endTransmission();
}

void matrixClear() {
  for (uint8_t r = 0; r < 7; r++) {
    matrixWrite(r, 0x00);
  }
}

void showStraight() {
  matrixClear();
  matrixWrite(0, 0x04);
  matrixWrite(1, 0x0E);
  matrixWrite(2, 0x15);
  for (uint8_t r = 3; r < 7; r++) {
    matrixWrite(r, 0x04);
  }
}

void showRight() {
  matrixClear();
  matrixWrite(3, 0x1F);
  matrixWrite(2, 0x02);
  matrixWrite(4, 0x02);
}

void showDone() {
  for (uint8_t r = 0; r < 7; r++) {
    matrixWrite(r, 0x1F);
  }
}
```"""

GUIDING_STEPS_V2 = GUIDING_STEPS_V1.replace(
    """#ifndef MATRIX_I2C_ADDR
#error MATRIX_I2C_ADDR must be defined for the 5x7 LED matrix
#endif
""",
    "#define MATRIX_I2C_ADDR 0x24\n",
)

BAKE_HERO_V1 = (
    "Happy to help with your oven-warning glove! To map temperature onto the LED matrix rows "
    "I first need to pick sensible limits. A comfortable baseline near the hand is about 25 "
    "degrees Celsius, and anything above 40 degrees should light the whole bar. I will read "
    "the SHTC3 sensor over I2C, convert the reading to Celsius, scale it to 0-7 rows, and "
    "light the matrix from the bottom up so it looks like rising flames."
)

BAKE_HERO_V2 = """```cpp
#include <Wire.h>

#define MATRIX_I2C_ADDR 0x24
const float TEMP_COOL = 25.0;
const float TEMP_HOT = 40.0;

void setup() {
  Serial.begin(115200);
  Wire.begin();
  matrixClear();
}

void loop() {
  float celsius = readTemperature();
  int rows = barRows(celsius);
  drawBar(rows);
  Serial.println(celsius);
  delay(250);
}

float readTemperature() {
  Wire.beginTransmission(0x70);
  Wire.write(0x7C);
  Wire.write(0xA2);
  Wire.endTransmission();
  delay(15);
  Wire.requestFrom(0x70, 6);
  uint16_t rawTemp = (Wire.read() << 8) | Wire.read();
  Wire.read();
  Wire.read();
  Wire.read();
  Wire.read();
  return -45.0 + 175.0 * rawTemp / 65535.0;
}

int barRows(float celsius) {
  if (celsius <= TEMP_COOL) {
    return 0;
  }
  if (celsius >= TEMP_HOT) {
    return 7;
  }
  return (int)((celsius - TEMP_COOL) * 7.0 / (TEMP_HOT - TEMP_COOL));
}

void matrixWrite(uint8_t row, uint8_t bits) {
  Wire.beginTransmission(MATRIX_I2C_ADDR);
  Wire.write(row);
  Wire.write(bits);
  Wire.endTransmission();
}

void matrixClear() {
  for (uint8_t r = 0; r < 7; r++) {
    matrixWrite(r, 0x00);
  }
}

void drawBar(int rows) {
  for (uint8_t r = 0; r < 7; r++) {
    matrixWrite(6 - r, r < rows ? 0x1F : 0x00);
  }
}
```"""

PEDAL_PULSE_V1 = """```cpp
#include <Wire.h>

#define RGB_LED_PIN 48
const float TILT_GENTLE = 5.0;
const float TILT_STEEP = 15.0;

void setup() {
  Serial.begin(115200);
  Wire.begin();
  imuInit();
}

void loop() {
  float pitch = readPitchDegrees();
  if (pitch < TILT_GENTLE) {
    neopixelWrite(RGB_LED_PIN, 0, 64, 0);
  } else if (pitch < TILT_STEEP) {
    neopixelWrite(RGB_LED_PIN, 64, 48, 0);
  } else {
    neopixelWrite(RGB_LED_PIN, 64, 0, 0);
  }
  Serial.println(pitch);
  delay(100);
}

void imuInit() {
  Wire.beginTransmission(0x6A);
  Wire.write(0x10);
  Wire.write(0x60);
  Wire.endTransmission();
}

int16_t readAxis(uint8_t reg) {
  Wire.beginTransmission(0x6A);
  Wire.write(reg);
  Wire.endTransmission(false);
  Wire.requestFrom(0x6A, 2);
  return Wire.read() | (Wire.read() << 8);
}

float readPitchDegrees() {
  float ax = readAxis(0x28);
  float ay = readAxis(0x2A);
  float az = readAxis(0x2C);
  return abs(atan2(ax, sqrt(ay * ay + az * az)) * 180.0 / PI);
}
```"""

FIT_FIT_V1 = """```cpp
#include <Wire.h>

#if !defined(IMU_I2C_ADDR)
#error IMU_I2C_ADDR is not defined, set it to the LSM6DSM address
#endif

#define RGB_LED_PIN 48
const int PAW_TARGET = 50;
const int MOVE_THRESHOLD = 12000;

int pawCount = 0;

void setup() {
  Serial.begin(115200);
  Wire.begin();
  imuInit();
  neopixelWrite(RGB_LED_PIN, 0, 0, 16);
}

void loop() {
  if (pawMoved()) {
    pawCount++;
    Serial.println(pawCount);
    if (pawCount >= PAW_TARGET) {
      neopixelWrite(RGB_LED_PIN, 255, 0, 0);
    }
  }
  delay(10);
}

void imuInit() {
  Wire.beginTransmission(IMU_I2C_ADDR);
  Wire.write(0x10);
  Wire.write(0x60);
  Wire.endTransmission();
}

bool pawMoved() {
  Wire.beginTransmission(IMU_I2C_ADDR);
  Wire.write(0x28);
  Wire.endTransmission(false);
  Wire.requestFrom(IMU_I2C_ADDR, 2);
  int ax = Wire.read() | (Wire.read() << 8);
  static bool above = false;
  bool spike = abs(ax) > MOVE_THRESHOLD;
  bool moved = spike && !above;
  above = spike;
  return moved;
}
```"""

FIT_FIT_V2 = FIT_FIT_V1.replace(
    """#if !defined(IMU_I2C_ADDR)
#error IMU_I2C_ADDR is not defined, set it to the LSM6DSM address
#endif
""",
    "#define IMU_I2C_ADDR 0x6A\n",
)

CONCEPTS = [
    {
        "name": "GuidingSteps",
        "manifest": {"board": "DeneyapG", "chain": ["A3", "S5"], "power": "BAT"},
        "instruction": GUIDING_STEPS_PROMPT,
        "replies": [GUIDING_STEPS_V1, GUIDING_STEPS_V2],
    },
    {
        "name": "BakeHero",
        "manifest": {"board": "DeneyapG", "chain": ["S4", "A3"]},
        "instruction": BAKE_HERO_PROMPT,
        "replies": [BAKE_HERO_V1, BAKE_HERO_V2],
    },
    {
        "name": "PedalPulse",
        "manifest": {"board": "DeneyapG", "chain": ["S5"], "onboard_used": ["A1"]},
        "instruction": PEDAL_PULSE_PROMPT,
        "replies": [PEDAL_PULSE_V1],
    },
    {
        "name": "FitFit",
        "manifest": {"board": "DeneyapG", "chain": ["S5"], "onboard_used": ["A1"]},
        "instruction": FIT_FIT_PROMPT,
        "replies": [FIT_FIT_V1, FIT_FIT_V2],
    },
]


def mock_compile_source(source: str, work_root: str) -> object:
    sketch_dir = prepare_sketch_dir(source, "fixturebuild", work_root)
    return compile_sketch(sketch_dir, ToolchainConfig(kind="mock", work_root=work_root))


def script_concept(concept: dict, fixture_path: Path, work_root: str) -> dict:
    catalog = load_default_catalog()
    manifest = HardwareManifest.from_dict(concept["manifest"])
    context = manifest_to_prompt_context(manifest, catalog)
    conversation = Conversation(
        (build_system_prompt(context), ChatMessage(role="user", content=concept["instruction"]))
    )
    iterations = 0
    model_calls = 0
    status = "incomplete"
    for reply_text in concept["replies"]:
        reply = ChatMessage(role="assistant", content=reply_text)
        record_fixture(conversation, reply, fixture_path)
        conversation = conversation.append(reply)
        model_calls += 1
        try:
            sketch = extract_sketch(reply_text)
        except NoCodeFound:
            conversation = conversation.append(ChatMessage(role="user", content=CORRECTIVE_MESSAGE))
            continue
        iterations += 1
        result = mock_compile_source(sketch.source, work_root)
        if result.success:
            status = "succeeded"
            break
        conversation = conversation.append(diagnostics_to_prompt(result))
    if status != "succeeded":
        raise SystemExit(f"{concept['name']}: scripted replies never reach a successful compile")
    return {
        "name": concept["name"],
        "manifest": concept["manifest"],
        "instruction": concept["instruction"],
        "expected_iteration": iterations,
        "expected_model_calls": model_calls,
    }


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    fixture_path = FIXTURES / "concepts.jsonl"
    if fixture_path.exists():
        fixture_path.unlink()
    meta = []
    with tempfile.TemporaryDirectory() as work_root:
        for concept in CONCEPTS:
            meta.append(script_concept(concept, fixture_path, work_root))
    (FIXTURES / "concepts.json").write_text(
        json.dumps(meta, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    print(f"wrote {fixture_path} and {FIXTURES / 'concepts.json'}")
    for entry in meta:
        print(
            f"  {entry['name']}: iteration {entry['expected_iteration']}, "
            f"{entry['expected_model_calls']} model calls"
        )


if __name__ == "__main__":
    main()
