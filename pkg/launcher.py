#!/usr/bin/env python3
"""
Quick launcher script for the BSRN toolkit.
This script provides an easy way to launch the common modes without remembering command-line arguments.
"""

import subprocess
import sys
from pathlib import Path


def _ask(prompt: str, default: str = "") -> str:
    value = input(f"{prompt}{f' [{default}]' if default else ''}: ").strip()
    return value or default


def main():
    """Interactive launcher for the BSRN toolkit."""
    print("=" * 60)
    print("BSRN Super-Resolution Toolkit - Quick Launcher")
    print("=" * 60)
    print("\nSelect mode:")
    print("1. Print parameter counts (c=64, s=64)")
    print("2. Run gradient check")
    print("3. Train a model")
    print("4. Upscale an image")
    print("5. Run Tests")
    print("6. Exit")

    while True:
        try:
            choice = input("\nEnter your choice (1-6): ").strip()

            if choice == "1":
                subprocess.run([sys.executable, "main.py", "params"], check=True)
                break
            elif choice == "2":
                print("\nRunning gradient check...")
                subprocess.run([sys.executable, "main.py", "gradcheck"], check=True)
                break
            elif choice == "3":
                data_dir = _ask("Training image directory", "data/train")
                out = _ask("Output directory", "runs/x2")
                scale = _ask("Scale (2, 3, 4 or 'multi')", "2")
                steps = _ask("Steps", "1000")
                scale_args = ["--multi-scale"] if scale == "multi" else ["--scale", scale]
                print("\nStarting training...")
                subprocess.run(
                    [sys.executable, "main.py", "train", "--data-dir", data_dir, "--out", out, "--steps", steps]
                    + scale_args,
                    check=True,
                )
                break
            elif choice == "4":
                checkpoint = _ask("Checkpoint", "runs/x2/checkpoint.bsrn")
                source = _ask("Input image")
                output = _ask("Output image", "sr.ppm")
                scale = _ask("Scale", "2")
                subprocess.run(
                    [sys.executable, "main.py", "upscale", "--checkpoint", checkpoint,
                     "--input", source, "--output", output, "--scale", scale],
                    check=True,
                )
                break
            elif choice == "5":
                print("\nRunning Tests...")
                subprocess.run([sys.executable, "main.py", "test"], check=True)
                break
            elif choice == "6":
                print("Goodbye!")
                break
            else:
                print("Invalid choice. Please enter 1-6.")

        except KeyboardInterrupt:
            print("\nGoodbye!")
            break
        except subprocess.CalledProcessError as e:
            print(f"Error running command: {e}")
            break


if __name__ == "__main__":
    # Change to the script's directory
    script_dir = Path(__file__).parent
    if script_dir != Path.cwd():
        print(f"Changing directory to: {script_dir}")
        import os
        os.chdir(script_dir)

    main()
