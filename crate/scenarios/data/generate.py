"""Regenerates irregular.txt and s_shape.txt (needs numpy and scipy)."""
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
HERE=Path(__file__).resolve().parent
rng=np.random.default_rng(2024)
# case 2: irregular blob with noise
s=np.array([55.,42.])
ang=np.array([0,30,60,90,120,150,180,210,240,270,300,330,360])
rad=np.array([30,37,36,28,31,26,28.5,29.5,25,23,19.5,24,30])
k=CubicSpline(np.radians(ang),rad,bc_type='periodic')
t=np.sort(rng.uniform(0,2*np.pi,360))
P=s+k(t)[:,None]*np.stack([np.cos(t),np.sin(t)],1)+rng.normal(0,0.3,(360,2))
with open(HERE/'irregular.txt','w') as f:
    f.write('# irregular boundary, 360 samples, gaussian noise sigma = 0.3 m\n# x y\n')
    for x,y in P: f.write('%.4f %.4f\n'%(x,y))
# case 3: two lobes, each star-shaped about its own reference, joined at x = -2;
# the notches at 0 and 180 degrees make the union non-star-shaped
d=np.deg2rad
s1=np.array([-2.,2.5]); s2=np.array([-2.,-2.5])
k1=CubicSpline(d([90,135,180,202.6,240,270]),[3.0,4.8,6.2,6.5,7.4,8.0])
k2=CubicSpline(d([-90,-45,0,24.4,60,90]),[3.0,4.8,6.2,6.04,7.0,8.0])
w,D=0.3,3.0
R1=lambda t: k1(t)-D*np.exp(-((t-d(180))/w)**2)
R2=lambda t: k2(t)-D*np.exp(-((t-d(0))/w)**2)
n=180; dt=np.pi/n
t2=d(-90)+(np.arange(n)+0.5)*dt; t1=d(90)+(np.arange(n)+0.5)*dt
P2=s2+R2(t2)[:,None]*np.stack([np.cos(t2),np.sin(t2)],1)
P1=s1+R1(t1)[:,None]*np.stack([np.cos(t1),np.sin(t1)],1)
with open(HERE/'s_shape.txt','w') as f:
    f.write('# non-star-shaped S boundary, 360 samples, digitized to 1 mm\n# x y\n')
    for x,y in np.vstack([P2,P1]): f.write('%.3f %.3f\n'%(x,y))
